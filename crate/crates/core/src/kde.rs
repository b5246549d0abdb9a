//! Gaussian kernel density estimates on an [`EvalGrid`] and their gradients
//! with respect to the sample positions (bandwidth held constant).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{EvalGrid, GridAxis};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Bandwidth used when the samples have zero spread.
pub const MIN_BANDWIDTH: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthMode {
    Silverman,
    Fixed(f64),
}

impl Default for BandwidthMode {
    fn default() -> Self {
        BandwidthMode::Silverman
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthEstimate {
    pub h: f64,
    /// True when the samples had zero spread and [`MIN_BANDWIDTH`] was used.
    pub degenerate: bool,
}

/// Linear-interpolation quantile of sorted data (the "type 7" definition).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub(crate) fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Silverman's rule of thumb `0.9 · min(σ̂, IQR/1.34) · m^(-1/5)`.
///
/// When the IQR vanishes but σ̂ does not, σ̂ alone is used. Zero spread falls
/// back to [`MIN_BANDWIDTH`] and logs a warning.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<BandwidthEstimate> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "silverman bandwidth needs >= 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow {
            context: "bandwidth samples".into(),
        });
    }
    let (_, sigma) = mean_std(samples);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sigma.min(iqr / 1.34) } else { sigma };
    if !(spread > 0.0) {
        log::warn!("zero-spread samples, using fallback bandwidth {MIN_BANDWIDTH}");
        return Ok(BandwidthEstimate {
            h: MIN_BANDWIDTH,
            degenerate: true,
        });
    }
    Ok(BandwidthEstimate {
        h: 0.9 * spread * (samples.len() as f64).powf(-0.2),
        degenerate: false,
    })
}

/// Resolves a bandwidth for one sample set.
pub fn bandwidth_for(mode: BandwidthMode, samples: &[f64]) -> Result<f64> {
    match mode {
        BandwidthMode::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
        BandwidthMode::Fixed(h) => Err(Error::invalid(format!("bandwidth must be > 0, got {h}"))),
        BandwidthMode::Silverman => silverman_bandwidth(samples).map(|b| b.h),
    }
}

fn check_kde_args(samples_len: usize, h: f64) -> Result<()> {
    if samples_len == 0 {
        return Err(Error::Empty("kde samples"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be > 0, got {h}")));
    }
    Ok(())
}

fn grid_axis_1d(grid: &EvalGrid) -> Result<&GridAxis> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: grid.dim(),
        });
    }
    Ok(grid.axis(0))
}

/// Kernel values `exp(-(g - y_j)² / 2h²)` for every sample/node pair, kept so
/// the density and its sample gradient share one evaluation.
#[derive(Clone, Debug)]
pub struct KernelTable {
    samples: Vec<f64>,
    nodes: Vec<f64>,
    h: f64,
    /// Row-major `samples × nodes`.
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(samples: &[f64], h: f64, axis: &GridAxis) -> Result<Self> {
        check_kde_args(samples.len(), h)?;
        let nodes = axis.coords();
        let inv = 1.0 / (2.0 * h * h);
        let mut values = Vec::with_capacity(samples.len() * nodes.len());
        for &y in samples {
            values.extend(nodes.iter().map(|&g| (-(g - y) * (g - y) * inv).exp()));
        }
        Ok(Self {
            samples: samples.to_vec(),
            nodes,
            h,
            values,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    fn row(&self, j: usize) -> &[f64] {
        let g = self.nodes.len();
        &self.values[j * g..(j + 1) * g]
    }

    /// KDE values at the nodes.
    pub fn density(&self) -> Vec<f64> {
        let g = self.nodes.len();
        let norm = 1.0 / (self.samples.len() as f64 * self.h * SQRT_2PI);
        let mut out = vec![0.0; g];
        for j in 0..self.samples.len() {
            for (o, k) in out.iter_mut().zip(self.row(j)) {
                *o += k;
            }
        }
        out.iter_mut().for_each(|o| *o *= norm);
        out
    }

    /// `∂(Σ_g upstream_g · p_g) / ∂y_j` for every sample.
    pub fn grad_samples(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: upstream.len(),
            });
        }
        let m = self.samples.len() as f64;
        let norm = 1.0 / (m * self.h.powi(3) * SQRT_2PI);
        Ok(self
            .samples
            .iter()
            .enumerate()
            .map(|(j, &y)| {
                let s: f64 = self
                    .row(j)
                    .iter()
                    .zip(&self.nodes)
                    .zip(upstream)
                    .map(|((k, g), u)| u * (g - y) * k)
                    .sum();
                s * norm
            })
            .collect())
    }
}

/// `p(g) = 1/(m h √(2π)) Σ_j exp(-(g - y_j)² / 2h²)` at every node of a 1D grid.
pub fn gaussian_kde(samples: &[f64], h: f64, grid: &EvalGrid) -> Result<Vec<f64>> {
    let axis = grid_axis_1d(grid)?;
    Ok(KernelTable::new(samples, h, axis)?.density())
}

/// Gradient of `upstream · gaussian_kde(samples)` with respect to each sample.
pub fn kde_grad_samples(
    samples: &[f64],
    h: f64,
    grid: &EvalGrid,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    let axis = grid_axis_1d(grid)?;
    KernelTable::new(samples, h, axis)?.grad_samples(upstream)
}

/// Product-Gaussian kernel table for 2D points on a 2D grid.
#[derive(Clone, Debug)]
pub struct KernelTable2d {
    x: KernelTable,
    y: KernelTable,
}

impl KernelTable2d {
    pub fn new(points: &[[f64; 2]], h: [f64; 2], grid: &EvalGrid) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: grid.dim(),
            });
        }
        if points.is_empty() {
            return Err(Error::Empty("kde points"));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        Ok(Self {
            x: KernelTable::new(&xs, h[0], grid.axis(0))?,
            y: KernelTable::new(&ys, h[1], grid.axis(1))?,
        })
    }

    fn norm(&self) -> f64 {
        1.0 / (self.x.samples.len() as f64 * 2.0 * PI * self.x.h * self.y.h)
    }

    /// Density on the lattice, flattened with the first axis slowest.
    pub fn density(&self) -> Vec<f64> {
        let (gx, gy) = (self.x.nodes.len(), self.y.nodes.len());
        let norm = self.norm();
        let mut out = vec![0.0; gx * gy];
        for j in 0..self.x.samples.len() {
            let ky = self.y.row(j);
            for (a, &kx) in self.x.row(j).iter().enumerate() {
                if kx == 0.0 {
                    continue;
                }
                let row = &mut out[a * gy..(a + 1) * gy];
                for (o, &k) in row.iter_mut().zip(ky) {
                    *o += kx * k;
                }
            }
        }
        out.iter_mut().for_each(|o| *o *= norm);
        out
    }

    /// Gradient of `Σ upstream · p` with respect to each point.
    pub fn grad_points(&self, upstream: &[f64]) -> Result<Vec<[f64; 2]>> {
        let (gx, gy) = (self.x.nodes.len(), self.y.nodes.len());
        if upstream.len() != gx * gy {
            return Err(Error::DimensionMismatch {
                expected: gx * gy,
                got: upstream.len(),
            });
        }
        let norm = self.norm();
        let (hx2, hy2) = (self.x.h * self.x.h, self.y.h * self.y.h);
        Ok((0..self.x.samples.len())
            .map(|j| {
                let (px, py) = (self.x.samples[j], self.y.samples[j]);
                let kx = self.x.row(j);
                let ky = self.y.row(j);
                // u_y[a] = Σ_b U[a,b] ky[b],  u_dy[a] = Σ_b U[a,b] ky[b] (gy_b - py)
                let mut gx_acc = 0.0;
                let mut gy_acc = 0.0;
                for a in 0..gx {
                    if kx[a] == 0.0 {
                        continue;
                    }
                    let row = &upstream[a * gy..(a + 1) * gy];
                    let mut s = 0.0;
                    let mut sd = 0.0;
                    for ((u, k), g) in row.iter().zip(ky).zip(&self.y.nodes) {
                        let t = u * k;
                        s += t;
                        sd += t * (g - py);
                    }
                    gx_acc += kx[a] * (self.x.nodes[a] - px) * s;
                    gy_acc += kx[a] * sd;
                }
                [norm * gx_acc / hx2, norm * gy_acc / hy2]
            })
            .collect())
    }
}

/// Product-Gaussian KDE of 2D points with per-axis bandwidths.
pub fn gaussian_kde_2d(points: &[[f64; 2]], h: [f64; 2], grid: &EvalGrid) -> Result<Vec<f64>> {
    Ok(KernelTable2d::new(points, h, grid)?.density())
}

/// Per-axis bandwidths for 2D points.
pub fn bandwidth_for_2d(mode: BandwidthMode, points: &[[f64; 2]]) -> Result<[f64; 2]> {
    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    Ok([bandwidth_for(mode, &xs)?, bandwidth_for(mode, &ys)?])
}
