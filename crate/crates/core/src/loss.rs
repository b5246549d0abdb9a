//! Training objective: row-wise KDE divergence, column-wise KDE divergence
//! and a linear potential well, with exact gradients w.r.t. network outputs.
//!
//! For a 1D target every output entry is a sample. For a 2D target each
//! output row holds consecutive `(y1, y2)` pairs; a "column" is then the
//! k-th point of every row.

use ndarray::Array2;

use crate::divergence::Divergence;
use crate::error::{Error, Result};
pub use crate::grid::EvalGrid;
use crate::kde::{self, BandwidthMode, KernelTable, KernelTable2d};
use crate::nn::SampleBatch;
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: BandwidthMode,
    /// Lower clamp applied to densities before taking logs.
    pub eps: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthMode::Silverman,
            eps: 1e-12,
        }
    }
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if let BandwidthMode::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("fixed bandwidth must be > 0, got {h}")));
            }
        }
        if !(self.eps > 0.0 && self.eps <= 1e-3) {
            return Err(Error::invalid(format!(
                "kde eps must lie in (0, 1e-3], got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Potential-well settings. Missing bounds default to the grid bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellConfig {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub slope: f64,
}

impl Default for WellConfig {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            slope: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub row: f64,
    pub col: f64,
    pub well: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            row: 1.0,
            col: 1.0,
            well: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LossConfig {
    pub kde: KdeConfig,
    pub divergence: Divergence,
    pub well: WellConfig,
    pub weights: LossWeights,
    pub exec: Exec,
}

/// The three weighted loss parts and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LossBreakdown {
    pub row_term: f64,
    pub col_term: f64,
    pub well_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(row_term: f64, col_term: f64, well_term: f64) -> Self {
        Self {
            row_term,
            col_term,
            well_term,
            total: row_term + col_term + well_term,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.row_term.is_finite()
            && self.col_term.is_finite()
            && self.well_term.is_finite()
            && self.total.is_finite()
    }
}

#[derive(Clone, Debug)]
pub struct LossEval {
    pub breakdown: LossBreakdown,
    /// `∂ total / ∂ outputs`, same shape as the batch.
    pub grad: SampleBatch,
    /// Unweighted divergence of each row's KDE (empty when the row term is skipped).
    pub per_row: Vec<f64>,
    pub row_skipped: bool,
    pub col_skipped: bool,
}

/// `slope · Σ_j [max(0, lo - y_j) + max(0, y_j - hi)]` and its gradient.
pub fn potential_well(samples: &[f64], lo: f64, hi: f64, slope: f64) -> Result<(f64, Vec<f64>)> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("well needs lo < hi, got [{lo}, {hi}]")));
    }
    if !(slope > 0.0) {
        return Err(Error::invalid(format!("well slope must be > 0, got {slope}")));
    }
    let mut value = 0.0;
    let grad = samples
        .iter()
        .map(|&y| {
            if y < lo {
                value += lo - y;
                -slope
            } else if y > hi {
                value += y - hi;
                slope
            } else {
                0.0
            }
        })
        .collect();
    Ok((slope * value, grad))
}

struct TermContext<'a> {
    target: &'a [f64],
    weights: Vec<f64>,
    grid: &'a EvalGrid,
    cfg: &'a LossConfig,
}

impl TermContext<'_> {
    fn term_1d(&self, samples: &[f64]) -> Result<(f64, Vec<f64>)> {
        let h = kde::bandwidth_for(self.cfg.kde.bandwidth, samples)?;
        let table = KernelTable::new(samples, h, self.grid.axis(0))?;
        let p = table.density();
        let div = self.cfg.divergence;
        let value = div.value_weighted(&p, self.target, &self.weights, self.cfg.kde.eps);
        let upstream = div.grad_p_weighted(&p, self.target, &self.weights, self.cfg.kde.eps);
        Ok((value, table.grad_samples(&upstream)?))
    }

    fn term_2d(&self, points: &[[f64; 2]]) -> Result<(f64, Vec<[f64; 2]>)> {
        let h = kde::bandwidth_for_2d(self.cfg.kde.bandwidth, points)?;
        let table = KernelTable2d::new(points, h, self.grid)?;
        let p = table.density();
        let div = self.cfg.divergence;
        let value = div.value_weighted(&p, self.target, &self.weights, self.cfg.kde.eps);
        let upstream = div.grad_p_weighted(&p, self.target, &self.weights, self.cfg.kde.eps);
        Ok((value, table.grad_points(&upstream)?))
    }
}

/// Evaluates the full objective on a batch of network outputs.
///
/// A batch with a single column (1D) or a single point per row (2D) skips
/// the row term; a batch with a single row skips the column term.
pub fn total_loss(
    outputs: &SampleBatch,
    target_tab: &[f64],
    grid: &EvalGrid,
    cfg: &LossConfig,
) -> Result<LossEval> {
    cfg.kde.validate()?;
    if target_tab.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: target_tab.len(),
        });
    }
    if outputs.is_empty() {
        return Err(Error::Empty("loss outputs"));
    }
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow {
            context: "loss outputs".into(),
        });
    }
    let ctx = TermContext {
        target: target_tab,
        weights: grid.trapezoid_weights(),
        grid,
        cfg,
    };
    let (rows, width) = outputs.dim();
    let mut grad = Array2::zeros((rows, width));
    let w = cfg.weights;

    let (row_term, col_term, per_row, row_skipped, col_skipped) = match grid.dim() {
        1 => {
            let row_skipped = width < 2;
            let col_skipped = rows < 2;
            let mut per_row = Vec::new();
            let mut row_term = 0.0;
            if !row_skipped {
                let res = par::try_map_indexed(cfg.exec, rows, |r| {
                    ctx.term_1d(&outputs.row(r).to_vec())
                })?;
                let scale = w.row / rows as f64;
                for (r, (value, g)) in res.into_iter().enumerate() {
                    row_term += value;
                    per_row.push(value);
                    for (c, gv) in g.into_iter().enumerate() {
                        grad[[r, c]] += scale * gv;
                    }
                }
                row_term *= scale;
            }
            let mut col_term = 0.0;
            if !col_skipped {
                let res = par::try_map_indexed(cfg.exec, width, |c| {
                    ctx.term_1d(&outputs.column(c).to_vec())
                })?;
                let scale = w.col / width as f64;
                for (c, (value, g)) in res.into_iter().enumerate() {
                    col_term += value;
                    for (r, gv) in g.into_iter().enumerate() {
                        grad[[r, c]] += scale * gv;
                    }
                }
                col_term *= scale;
            } else {
                log::warn!("batch has a single row; column term skipped");
            }
            (row_term, col_term, per_row, row_skipped, col_skipped)
        }
        2 => {
            if width % 2 != 0 {
                return Err(Error::shape(format!(
                    "2D target needs an even output width, got {width}"
                )));
            }
            let npts = width / 2;
            let row_points = |r: usize| -> Vec<[f64; 2]> {
                (0..npts)
                    .map(|k| [outputs[[r, 2 * k]], outputs[[r, 2 * k + 1]]])
                    .collect()
            };
            let row_skipped = npts < 2;
            let col_skipped = rows < 2;
            let mut per_row = Vec::new();
            let mut row_term = 0.0;
            if !row_skipped {
                let res = par::try_map_indexed(cfg.exec, rows, |r| ctx.term_2d(&row_points(r)))?;
                let scale = w.row / rows as f64;
                for (r, (value, g)) in res.into_iter().enumerate() {
                    row_term += value;
                    per_row.push(value);
                    for (k, gv) in g.into_iter().enumerate() {
                        grad[[r, 2 * k]] += scale * gv[0];
                        grad[[r, 2 * k + 1]] += scale * gv[1];
                    }
                }
                row_term *= scale;
            }
            let mut col_term = 0.0;
            if !col_skipped {
                let res = par::try_map_indexed(cfg.exec, npts, |k| {
                    let pts: Vec<[f64; 2]> = (0..rows)
                        .map(|r| [outputs[[r, 2 * k]], outputs[[r, 2 * k + 1]]])
                        .collect();
                    ctx.term_2d(&pts)
                })?;
                let scale = w.col / npts as f64;
                for (k, (value, g)) in res.into_iter().enumerate() {
                    col_term += value;
                    for (r, gv) in g.into_iter().enumerate() {
                        grad[[r, 2 * k]] += scale * gv[0];
                        grad[[r, 2 * k + 1]] += scale * gv[1];
                    }
                }
                col_term *= scale;
            } else {
                log::warn!("batch has a single row; column term skipped");
            }
            (row_term, col_term, per_row, row_skipped, col_skipped)
        }
        d => return Err(Error::invalid(format!("unsupported grid dimension {d}"))),
    };

    // Well, per coordinate axis (axis = column parity for 2D).
    let mut well_value = 0.0;
    for (axis_idx, axis) in grid.axes().iter().enumerate() {
        let lo = cfg.well.lo.unwrap_or(axis.lo);
        let hi = cfg.well.hi.unwrap_or(axis.hi);
        let stride = grid.dim();
        let cols: Vec<usize> = (axis_idx..width).step_by(stride).collect();
        let values: Vec<f64> = (0..rows)
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| outputs[[r, c]])
            .collect();
        let (v, g) = potential_well(&values, lo, hi, cfg.well.slope)?;
        well_value += v;
        for (idx, gv) in g.into_iter().enumerate() {
            let (r, c) = (idx / cols.len(), cols[idx % cols.len()]);
            grad[[r, c]] += w.well * gv;
        }
    }

    Ok(LossEval {
        breakdown: LossBreakdown::new(row_term, col_term, w.well * well_value),
        grad,
        per_row,
        row_skipped,
        col_skipped,
    })
}
