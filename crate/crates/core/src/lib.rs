//! Neural sampling from explicitly known densities.
//!
//! A dense network maps vectors of `Uniform(-1, 1)` noise to output vectors
//! whose values are distributed according to a target density. Training
//! minimizes a divergence between Gaussian KDEs of the outputs (per output
//! vector and per output position) and the tabulated target, plus a linear
//! potential well that keeps outputs on the evaluation grid.
//!
//! The crate also ships the classical samplers the network is compared
//! against (inversion, rejection, Gaussian mixture, Metropolis-Hastings) and
//! the evaluation tools used to compare them.

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csv;
pub mod divergence;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod grid;
pub mod kde;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod par;
pub mod targets;
pub mod trainer;

pub use error::{Error, Result};
pub use grid::EvalGrid;
pub use loss::{LossBreakdown, LossConfig};
pub use nn::{Architecture, Mlp, SampleBatch};
pub use targets::TargetDensity;
