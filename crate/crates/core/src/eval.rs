//! Measurement helpers: histograms, averaged and 2D KDEs, divergence to a
//! tabulated target and a few goodness-of-fit statistics.

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::kde::{self, BandwidthMode};
use crate::loss::KdeConfig;
use crate::nn::SampleBatch;
use crate::par::{self, Exec};

/// Uniform-bin histogram. Heights are `count / (total · width)` where `total`
/// includes the overflow, so they estimate the density inside `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub heights: Vec<f64>,
    /// Samples outside `[lo, hi]`.
    pub overflow: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Empty("histogram samples"));
    }
    if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!(
            "histogram needs bins >= 1 and finite lo < hi, got bins={bins} [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0u64; bins];
    let mut overflow = 0;
    for &y in samples {
        if !(y >= lo && y <= hi) {
            overflow += 1;
            continue;
        }
        let idx = (((y - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = samples.len() as f64;
    let heights = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    Ok(Histogram {
        edges,
        counts,
        heights,
        overflow,
    })
}

/// Mean over rows of each row's Gaussian KDE. Rows are estimated in parallel
/// and summed in row order.
pub fn mean_kde(vectors: &SampleBatch, mode: BandwidthMode, grid: &EvalGrid, exec: Exec) -> Result<Vec<f64>> {
    let rows = vectors.nrows();
    if rows == 0 || vectors.ncols() == 0 {
        return Err(Error::Empty("mean_kde vectors"));
    }
    let kdes = par::try_map_indexed(exec, rows, |r| {
        let row = vectors.row(r).to_vec();
        let h = kde::bandwidth_for(mode, &row)?;
        kde::gaussian_kde(&row, h, grid)
    })?;
    let mut mean = vec![0.0; grid.len()];
    for k in &kdes {
        for (m, v) in mean.iter_mut().zip(k) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }
    Ok(mean)
}

/// Product-Gaussian KDE with one bandwidth for both axes.
pub fn kde_2d(points: &[[f64; 2]], h: f64, grid: &EvalGrid) -> Result<Vec<f64>> {
    kde::gaussian_kde_2d(points, [h, h], grid)
}

/// Product-Gaussian KDE with a bandwidth resolved per axis.
pub fn kde_2d_auto(points: &[[f64; 2]], mode: BandwidthMode, grid: &EvalGrid) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Empty("kde points"));
    }
    let h = kde::bandwidth_for_2d(mode, points)?;
    kde::gaussian_kde_2d(points, h, grid)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::invalid(format!(
            "correlation needs >= 3 pairs, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for a constant column"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scatter {
    pub pairs: Vec<(f64, f64)>,
    pub r: f64,
}

/// Columns `i` and `j` of a batch as pairs, with their correlation.
pub fn dependence_scatter(outputs: &SampleBatch, i: usize, j: usize) -> Result<Scatter> {
    let cols = outputs.ncols();
    if i == j || i >= cols || j >= cols {
        return Err(Error::invalid(format!(
            "need distinct column indices below {cols}, got i={i} j={j}"
        )));
    }
    let x = outputs.column(i).to_vec();
    let y = outputs.column(j).to_vec();
    let r = pearson(&x, &y)?;
    Ok(Scatter {
        pairs: x.into_iter().zip(y).collect(),
        r,
    })
}

/// Divergence between the KDE of `samples` and the tabulated target.
pub fn divergence_to_target(
    samples: &[f64],
    target_tab: &[f64],
    grid: &EvalGrid,
    kde_cfg: &KdeConfig,
    divergence: Divergence,
) -> Result<f64> {
    let h = kde::bandwidth_for(kde_cfg.bandwidth, samples)?;
    let p = kde::gaussian_kde(samples, h, grid)?;
    divergence.value(&p, target_tab, grid, kde_cfg.eps)
}

/// 2D counterpart of [`divergence_to_target`] with per-axis bandwidths.
pub fn divergence_to_target_2d(
    points: &[[f64; 2]],
    target_tab: &[f64],
    grid: &EvalGrid,
    kde_cfg: &KdeConfig,
    divergence: Divergence,
) -> Result<f64> {
    let p = kde_2d_auto(points, kde_cfg.bandwidth, grid)?;
    divergence.value(&p, target_tab, grid, kde_cfg.eps)
}

/// Divergence between a histogram and a density evaluated at the bin
/// centers, each bin weighted by its width.
pub fn histogram_divergence<F: Fn(f64) -> f64>(
    hist: &Histogram,
    density: F,
    divergence: Divergence,
    eps: f64,
) -> f64 {
    let q: Vec<f64> = hist.centers().into_iter().map(density).collect();
    let w = vec![hist.bin_width(); hist.bins()];
    divergence.value_weighted(&hist.heights, &q, &w, eps)
}

/// Two-sided Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("ks samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &y) in sorted.iter().enumerate() {
        let f = cdf(y);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}
