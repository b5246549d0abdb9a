//! Uniform evaluation lattices and their trapezoid quadrature weights.

use crate::error::{Error, Result};

/// One axis of an [`EvalGrid`]: `points` equally spaced nodes from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!("grid axis needs lo < hi, got [{lo}, {hi}]")));
        }
        if points < 2 {
            return Err(Error::invalid(format!("grid axis needs >= 2 points, got {points}")));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Trapezoid weights: `Δ/2` at both ends, `Δ` elsewhere.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let d = self.spacing();
        let mut w = vec![d; self.points];
        w[0] = 0.5 * d;
        w[self.points - 1] = 0.5 * d;
        w
    }
}

/// A 1D or 2D lattice on which KDEs, tabulated targets and divergences live.
///
/// Multi-dimensional values are flattened row-major with the first axis
/// slowest: index `i * points_1 + j` holds `(axis0[i], axis1[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid {
    axes: Vec<GridAxis>,
}

impl EvalGrid {
    pub fn new_1d(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Ok(Self {
            axes: vec![GridAxis::new(lo, hi, points)?],
        })
    }

    /// Square lattice with the same axis on both dimensions.
    pub fn new_2d(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let axis = GridAxis::new(lo, hi, points)?;
        Ok(Self { axes: vec![axis, axis] })
    }

    pub fn from_axes(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid(format!(
                "grids of dimension {} are not supported",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &GridAxis {
        &self.axes[i]
    }

    /// Total number of lattice nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of the flattened node `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => vec![a.coord(k)],
            [a, b] => vec![a.coord(k / b.points), b.coord(k % b.points)],
            _ => unreachable!("grid dimension is 1 or 2"),
        }
    }

    /// Flattened trapezoid weights (outer product of per-axis weights).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => a.trapezoid_weights(),
            [a, b] => {
                let wa = a.trapezoid_weights();
                let wb = b.trapezoid_weights();
                wa.iter()
                    .flat_map(|x| wb.iter().map(move |y| x * y))
                    .collect()
            }
            _ => unreachable!("grid dimension is 1 or 2"),
        }
    }

    /// Trapezoid-rule integral of tabulated values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(self
            .trapezoid_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Lower and upper bounds of the first axis.
    pub fn bounds(&self) -> (f64, f64) {
        (self.axes[0].lo, self.axes[0].hi)
    }
}
