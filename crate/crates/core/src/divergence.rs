//! Discretized divergences between tabulated densities.
//!
//! The default is the symmetrized Kullback-Leibler form
//! `½ ∫ [p log(p/q) + q log(q/p)]`, integrated with the trapezoid rule after
//! clamping both densities below at `eps`. The mixture-based Jensen-Shannon
//! divergence and a plain squared error are available as alternatives.

use crate::error::{Error, Result};
use crate::grid::EvalGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Divergence {
    /// `½ ∫ [p log(p/q) + q log(q/p)]`.
    #[default]
    Symmetric,
    /// `½ ∫ [p log(p/M) + q log(q/M)]`, `M = (p+q)/2`.
    Mixture,
    /// `∫ (p - q)²`.
    Mse,
}

fn check(p: &[f64], q: &[f64], grid: &EvalGrid) -> Result<()> {
    if p.len() != grid.len() || q.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: if p.len() != grid.len() { p.len() } else { q.len() },
        });
    }
    Ok(())
}

impl Divergence {
    /// Divergence given precomputed trapezoid weights.
    pub fn value_weighted(self, p: &[f64], q: &[f64], weights: &[f64], eps: f64) -> f64 {
        let mut acc = 0.0;
        for ((&pi, &qi), &w) in p.iter().zip(q).zip(weights) {
            let (a, b) = (pi.max(eps), qi.max(eps));
            let term = match self {
                // ln a - ln b keeps the integrand exactly antisymmetric under swap.
                Divergence::Symmetric => (a - b) * (a.ln() - b.ln()),
                Divergence::Mixture => {
                    let lm = (0.5 * (a + b)).ln();
                    (a * (a.ln() - lm) + b * (b.ln() - lm)).max(0.0)
                }
                Divergence::Mse => 2.0 * (pi - qi) * (pi - qi),
            };
            acc += w * term;
        }
        0.5 * acc
    }

    /// Gradient of [`Divergence::value_weighted`] w.r.t. `p`. Entries where `p`
    /// was clamped get zero gradient.
    pub fn grad_p_weighted(self, p: &[f64], q: &[f64], weights: &[f64], eps: f64) -> Vec<f64> {
        p.iter()
            .zip(q)
            .zip(weights)
            .map(|((&pi, &qi), &w)| {
                if self != Divergence::Mse && pi <= eps {
                    return 0.0;
                }
                let b = qi.max(eps);
                match self {
                    Divergence::Symmetric => 0.5 * w * ((pi / b).ln() + 1.0 - b / pi),
                    Divergence::Mixture => 0.5 * w * (pi / (0.5 * (pi + b))).ln(),
                    Divergence::Mse => 2.0 * w * (pi - qi),
                }
            })
            .collect()
    }

    pub fn value(self, p: &[f64], q: &[f64], grid: &EvalGrid, eps: f64) -> Result<f64> {
        check(p, q, grid)?;
        Ok(self.value_weighted(p, q, &grid.trapezoid_weights(), eps))
    }

    pub fn grad_p(self, p: &[f64], q: &[f64], grid: &EvalGrid, eps: f64) -> Result<Vec<f64>> {
        check(p, q, grid)?;
        Ok(self.grad_p_weighted(p, q, &grid.trapezoid_weights(), eps))
    }
}

/// Symmetrized KL divergence of two tabulated densities on `grid`.
pub fn jsd(p: &[f64], q: &[f64], grid: &EvalGrid, eps: f64) -> Result<f64> {
    Divergence::Symmetric.value(p, q, grid, eps)
}

/// `∂ jsd / ∂ p` at every grid node.
pub fn jsd_grad_p(p: &[f64], q: &[f64], grid: &EvalGrid, eps: f64) -> Result<Vec<f64>> {
    Divergence::Symmetric.grad_p(p, q, grid, eps)
}
