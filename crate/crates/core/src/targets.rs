//! Explicitly known, normalized target densities.
//!
//! The built-ins are the asymmetric bimodal Gaussian, the two-sided
//! exponential, the `y² exp(-b|y|)` family and an equal-weight 2D
//! two-mode Gaussian. Anything else can be wrapped with
//! [`TargetDensity::custom`] as long as it is normalized.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::EvalGrid;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// `[2 exp(-2(y-1)²) + exp(-(y+3)²/2)] / (2√(2π))`, i.e. ½N(1, ½²) + ½N(-3, 1).
pub fn bimodal_gauss_pdf(y: f64) -> f64 {
    let a = (-2.0 * (y - 1.0).powi(2)).exp();
    let b = (-0.5 * (y + 3.0).powi(2)).exp();
    (2.0 * a + b) / (2.0 * SQRT_2PI)
}

/// Two-sided exponential `½ exp(-|y|)`.
pub fn laplace_pdf(y: f64) -> f64 {
    0.5 * (-y.abs()).exp()
}

/// `(b³/4) y² exp(-b|y|)`, normalized over the real line.
pub fn y2exp_pdf(y: f64, b: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("y2exp needs b > 0, got {b}")));
    }
    Ok(y2exp_unchecked(y, b))
}

fn y2exp_unchecked(y: f64, b: f64) -> f64 {
    0.25 * b.powi(3) * y * y * (-b * y.abs()).exp()
}

/// Equal-weight mixture of unit-covariance Gaussians at (1.5, 1.5) and (-1.5, -1.5).
pub fn bimodal_gauss_2d_pdf(y1: f64, y2: f64) -> f64 {
    let a = (-0.5 * ((y1 - 1.5).powi(2) + (y2 - 1.5).powi(2))).exp();
    let b = (-0.5 * ((y1 + 1.5).powi(2) + (y2 + 1.5).powi(2))).exp();
    0.5 * (a + b) / (2.0 * PI)
}

type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Bimodal,
    Laplace,
    Y2Exp { b: f64 },
    Bimodal2d,
    Custom(CustomFn),
}

/// A normalized density with its working bounds.
#[derive(Clone)]
pub struct TargetDensity {
    name: String,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    kind: Kind,
}

impl fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .finish()
    }
}

/// One Gaussian component: weight, mean vector, isotropic standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

impl TargetDensity {
    pub fn bimodal() -> Self {
        Self::builtin("bimodal", 1, Kind::Bimodal)
    }

    pub fn laplace() -> Self {
        Self::builtin("laplace", 1, Kind::Laplace)
    }

    /// Default bounds are `±max(10, 12/b)`: the y² factor leaves more than
    /// 1e-3 of the mass outside ±10 when b = 1.
    pub fn y2exp(b: f64) -> Result<Self> {
        y2exp_pdf(0.0, b)?;
        let half = (12.0 / b).max(10.0);
        Ok(Self {
            bounds: vec![(-half, half)],
            ..Self::builtin("y2exp", 1, Kind::Y2Exp { b })
        })
    }

    pub fn bimodal_2d() -> Self {
        Self::builtin("bimodal2d", 2, Kind::Bimodal2d)
    }

    fn builtin(name: &str, dim: usize, kind: Kind) -> Self {
        let half = if dim == 1 { 10.0 } else { 6.0 };
        Self {
            name: name.to_string(),
            dim,
            bounds: vec![(-half, half); dim],
            kind,
        }
    }

    /// Wraps a user density. It must already be normalized; this is checked by
    /// quadrature on `bounds` with `points` nodes per axis.
    pub fn custom<F>(name: &str, bounds: Vec<(f64, f64)>, points: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let target = Self {
            name: name.to_string(),
            dim: bounds.len(),
            bounds,
            kind: Kind::Custom(Arc::new(f)),
        };
        let mass = target.quadrature_mass(points)?;
        if !(1.0 - 1e-3..=1.0 + 1e-3).contains(&mass) {
            return Err(Error::invalid(format!(
                "density `{name}` integrates to {mass} on its bounds, expected 1"
            )));
        }
        Ok(target)
    }

    /// Looks up a built-in by name. `b` is only used by `y2exp` (default 1).
    pub fn from_name(name: &str, b: Option<f64>) -> Result<Self> {
        match name {
            "bimodal" => Ok(Self::bimodal()),
            "laplace" => Ok(Self::laplace()),
            "y2exp" => Self::y2exp(b.unwrap_or(1.0)),
            "bimodal2d" => Ok(Self::bimodal_2d()),
            other => Err(Error::invalid(format!(
                "unknown target `{other}` (expected bimodal, laplace, y2exp or bimodal2d)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: bounds.len(),
            });
        }
        self.bounds = bounds;
        Ok(self)
    }

    /// Density at `y` (`y.len()` must equal `dim`).
    pub fn eval(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim);
        match &self.kind {
            Kind::Bimodal => bimodal_gauss_pdf(y[0]),
            Kind::Laplace => laplace_pdf(y[0]),
            Kind::Y2Exp { b } => y2exp_unchecked(y[0], *b),
            Kind::Bimodal2d => bimodal_gauss_2d_pdf(y[0], y[1]),
            Kind::Custom(f) => f(y),
        }
    }

    pub fn eval_1d(&self, y: f64) -> f64 {
        self.eval(&[y])
    }

    /// The exact Gaussian decomposition of the target, when it has one.
    pub fn gaussian_components(&self) -> Option<Vec<GaussianComponent>> {
        match self.kind {
            Kind::Bimodal => Some(vec![
                GaussianComponent { weight: 0.5, mean: vec![1.0], std: 0.5 },
                GaussianComponent { weight: 0.5, mean: vec![-3.0], std: 1.0 },
            ]),
            Kind::Bimodal2d => Some(vec![
                GaussianComponent { weight: 0.5, mean: vec![1.5, 1.5], std: 1.0 },
                GaussianComponent { weight: 0.5, mean: vec![-1.5, -1.5], std: 1.0 },
            ]),
            _ => None,
        }
    }

    /// Default evaluation grid spanning the bounds.
    pub fn default_grid(&self, points: usize) -> Result<EvalGrid> {
        let (lo, hi) = self.bounds[0];
        match self.dim {
            1 => EvalGrid::new_1d(lo, hi, points),
            2 => EvalGrid::new_2d(lo, hi, points),
            d => Err(Error::invalid(format!("unsupported target dimension {d}"))),
        }
    }

    /// Trapezoid mass over the bounds with `points` nodes per axis.
    pub fn quadrature_mass(&self, points: usize) -> Result<f64> {
        let axes = self
            .bounds
            .iter()
            .map(|&(lo, hi)| crate::grid::GridAxis::new(lo, hi, points))
            .collect::<Result<Vec<_>>>()?;
        let grid = EvalGrid::from_axes(axes)?;
        let tab = tabulate(self, &grid)?;
        grid.integrate(&tab)
    }
}

/// Evaluates `target` at every grid node (flattened row-major for 2D).
pub fn tabulate(target: &TargetDensity, grid: &EvalGrid) -> Result<Vec<f64>> {
    if grid.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: grid.dim(),
        });
    }
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    Ok((0..grid.len()).map(|k| target.eval(&grid.point(k))).collect())
}

/// Tabulates a 1D target on arbitrary nodes.
pub fn tabulate_points(target: &TargetDensity, nodes: &[f64]) -> Result<Vec<f64>> {
    if target.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: target.dim(),
        });
    }
    if nodes.is_empty() {
        return Err(Error::Empty("grid"));
    }
    Ok(nodes.iter().map(|&y| target.eval_1d(y)).collect())
}
