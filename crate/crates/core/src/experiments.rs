//! End-to-end pipelines that regenerate the data behind each comparison
//! figure, at a reduced `desk` budget or the full `paper` budget.
//!
//! Every pipeline is a function of `(scale, seed)` only and writes plain CSV
//! plus a `summary.txt` of `key = value` metrics.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;

use crate::baselines::{
    inversion_sample, metropolis_hastings, mixture_sample, mixture_sample_nd, rejection_sample,
    MhSpec, MixtureSpec, RejectionSpec,
};
use crate::csv::{fmt_f64, write_file, write_table};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::eval::{
    dependence_scatter, divergence_to_target, divergence_to_target_2d, histogram, kde_2d_auto,
    mean_kde, pearson, Histogram,
};
use crate::grid::EvalGrid;
use crate::kde::BandwidthMode;
use crate::loss::KdeConfig;
use crate::nn::{Architecture, Mlp, SampleBatch};
use crate::par::Exec;
use crate::targets::TargetDensity;
use crate::trainer::{make_input_batch, sample_model, sample_points, seeded_rng, LossHistory, TrainConfig, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Figure::Fig1),
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4" => Ok(Figure::Fig4),
            other => Err(Error::invalid(format!(
                "unknown figure `{other}` (expected fig1, fig2, fig3 or fig4)"
            ))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::invalid(format!(
                "unknown scale `{other}` (expected desk or paper)"
            ))),
        }
    }
}

/// Samples drawn from every trained or baseline sampler for evaluation.
pub const EVAL_SAMPLES: usize = 10_000;
/// Output vectors compared in the dependence experiment.
pub const EVAL_VECTORS: usize = 500;
pub const HIST_BINS: usize = 100;

/// Single-output model used for the 1D histogram comparisons.
pub fn scalar_model_config(target: TargetDensity, scale: Scale, seed: u64) -> Result<TrainConfig> {
    let (units, layers, inputs) = match scale {
        Scale::Desk => (64, 5, 200_000),
        Scale::Paper => (500, 10, 10_000_000),
    };
    let arch = Architecture {
        input_dim: 1,
        units,
        layers,
        output_dim: 1,
    };
    let mut cfg = TrainConfig::new(arch, target, inputs)?;
    cfg.batch_rows = 256;
    cfg.adam.lr = 3e-3;
    cfg.seed = seed;
    cfg.log_every = 10;
    Ok(cfg)
}

/// Square `n → n` model used for the dependence experiment.
pub fn vector_model_config(scale: Scale, seed: u64) -> Result<TrainConfig> {
    let (n, layers, inputs) = match scale {
        Scale::Desk => (32, 5, 100_000),
        Scale::Paper => (500, 10, 5_000_000),
    };
    let mut cfg = TrainConfig::new(Architecture::square(n, layers), TargetDensity::bimodal(), inputs)?;
    cfg.seed = seed;
    cfg.log_every = 10;
    Ok(cfg)
}

/// Model emitting `n_points` 2D points per output vector.
pub fn points_model_config(scale: Scale, seed: u64) -> Result<TrainConfig> {
    let (n_points, units, layers, inputs, grid_points) = match scale {
        Scale::Desk => (16, 32, 6, 100_000, 48),
        Scale::Paper => (250, 500, 10, 400_000, 64),
    };
    let target = TargetDensity::bimodal_2d();
    let mut cfg = TrainConfig::new(
        Architecture {
            input_dim: 2 * n_points,
            units,
            layers,
            output_dim: 2 * n_points,
        },
        target.clone(),
        inputs,
    )?;
    cfg.grid = target.default_grid(grid_points)?;
    cfg.seed = seed;
    cfg.log_every = 10;
    Ok(cfg)
}

fn eval_kde() -> KdeConfig {
    KdeConfig::default()
}

/// Trains a 1D model and reports its divergence to the target before and after.
pub struct ScalarRun {
    pub model: Mlp,
    pub history: LossHistory,
    pub grid: EvalGrid,
    pub target_tab: Vec<f64>,
    pub initial_divergence: f64,
    pub samples: Vec<f64>,
    pub divergence: f64,
}

pub fn train_scalar(cfg: TrainConfig, eval_seed: u64) -> Result<ScalarRun> {
    let grid = cfg.grid.clone();
    let trainer = Trainer::new(cfg)?;
    let tab = trainer.target_tab().to_vec();
    let initial = sample_model(trainer.model(), EVAL_SAMPLES, &mut seeded_rng(eval_seed))?;
    let initial_divergence = divergence_to_target(&initial, &tab, &grid, &eval_kde(), Divergence::Symmetric)?;
    let (model, history) = trainer.run()?;
    let samples = sample_model(&model, EVAL_SAMPLES, &mut seeded_rng(eval_seed))?;
    let divergence = divergence_to_target(&samples, &tab, &grid, &eval_kde(), Divergence::Symmetric)?;
    Ok(ScalarRun {
        model,
        history,
        grid,
        target_tab: tab,
        initial_divergence,
        samples,
        divergence,
    })
}

#[derive(Clone, Debug, Default)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn write_hist(path: &Path, h: &Histogram) -> Result<()> {
    let rows = h
        .centers()
        .into_iter()
        .zip(&h.heights)
        .map(|(c, &v)| vec![c, v]);
    write_table(path, &["y", "density"], rows)
}

fn write_target_1d(path: &Path, grid: &EvalGrid, tab: &[f64]) -> Result<()> {
    let rows = (0..grid.len()).map(|k| vec![grid.point(k)[0], tab[k]]);
    write_table(path, &["y", "density"], rows)
}

fn write_surface(path: &Path, grid: &EvalGrid, values: &[f64]) -> Result<()> {
    let rows = (0..grid.len()).map(|k| {
        let p = grid.point(k);
        vec![p[0], p[1], values[k]]
    });
    write_table(path, &["y1", "y2", "density"], rows)
}

fn write_history(dir: &Path, h: &LossHistory) -> Result<()> {
    write_file(&dir.join("history.csv"), &h.to_csv())
}

fn bounds_1d(grid: &EvalGrid) -> (f64, f64) {
    let a = grid.axis(0);
    (a.lo, a.hi)
}

/// Model vs inversion sampling on the two-sided exponential target.
pub fn fig2(scale: Scale, seed: u64, out_dir: Option<&Path>) -> Result<Summary> {
    let target = TargetDensity::laplace();
    let run = train_scalar(scalar_model_config(target.clone(), scale, seed)?, seed.wrapping_add(1))?;
    let inversion = inversion_sample(&target, &run.grid, EVAL_SAMPLES, &mut seeded_rng(seed.wrapping_add(2)))?;
    let inv_div = divergence_to_target(&inversion, &run.target_tab, &run.grid, &eval_kde(), Divergence::Symmetric)?;
    let r = pearson(&run.samples[..EVAL_SAMPLES - 1], &run.samples[1..])?;

    let mut s = Summary::default();
    s.push("figure", "fig2");
    s.push("seed", seed);
    s.push("initial_divergence", fmt_f64(run.initial_divergence));
    s.push("model_divergence", fmt_f64(run.divergence));
    s.push("inversion_divergence", fmt_f64(inv_div));
    s.push("consecutive_pearson", fmt_f64(r));
    if let Some(dir) = out_dir {
        let (lo, hi) = bounds_1d(&run.grid);
        write_hist(&dir.join("model_hist.csv"), &histogram(&run.samples, lo, hi, HIST_BINS)?)?;
        write_hist(&dir.join("inversion_hist.csv"), &histogram(&inversion, lo, hi, HIST_BINS)?)?;
        write_target_1d(&dir.join("target.csv"), &run.grid, &run.target_tab)?;
        write_history(dir, &run.history)?;
        write_file(&dir.join("summary.txt"), &s.render())?;
    }
    Ok(s)
}

/// Per-vector KDE statistics of the square model against i.i.d. vectors.
pub struct VectorRun {
    pub outputs: SampleBatch,
    pub model_stat: f64,
    pub inversion_stat: f64,
}

fn mean_row_divergence(batch: &SampleBatch, tab: &[f64], grid: &EvalGrid) -> Result<f64> {
    let mut total = 0.0;
    for r in 0..batch.nrows() {
        total += divergence_to_target(&batch.row(r).to_vec(), tab, grid, &eval_kde(), Divergence::Symmetric)?;
    }
    Ok(total / batch.nrows() as f64)
}

/// Model vs mixture-of-Gaussians sampling, including the dependence scatter.
pub fn fig1(scale: Scale, seed: u64, out_dir: Option<&Path>) -> Result<(Summary, VectorRun)> {
    let cfg = vector_model_config(scale, seed)?;
    let n = cfg.architecture.output_dim;
    let grid = cfg.grid.clone();
    let target = cfg.target.clone();
    let trainer = Trainer::new(cfg)?;
    let tab = trainer.target_tab().to_vec();
    let (model, history) = trainer.run()?;

    let outputs = model.predict(&make_input_batch(EVAL_VECTORS, n, &mut seeded_rng(seed.wrapping_add(1))))?;
    let inversion = Array2::from_shape_vec(
        (EVAL_VECTORS, n),
        inversion_sample(&target, &grid, EVAL_VECTORS * n, &mut seeded_rng(seed.wrapping_add(2)))?,
    )
    .map_err(|e| Error::shape(e.to_string()))?;
    let spec = MixtureSpec::for_target(&target).ok_or_else(|| Error::invalid("target has no mixture form"))?;
    let mixture = Array2::from_shape_vec(
        (EVAL_VECTORS, n),
        mixture_sample(&spec, EVAL_VECTORS * n, &mut seeded_rng(seed.wrapping_add(3))),
    )
    .map_err(|e| Error::shape(e.to_string()))?;

    let model_stat = mean_row_divergence(&outputs, &tab, &grid)?;
    let inversion_stat = mean_row_divergence(&inversion, &tab, &grid)?;
    let mixture_stat = mean_row_divergence(&mixture, &tab, &grid)?;

    let mut pick = seeded_rng(seed.wrapping_add(4));
    let i = pick.gen_range(0..n);
    let j = (i + 1 + pick.gen_range(0..n - 1)) % n;
    let scatter = dependence_scatter(&outputs, i, j)?;
    log::info!("dependence scatter uses output elements i = {i}, j = {j}");

    let mut s = Summary::default();
    s.push("figure", "fig1");
    s.push("seed", seed);
    s.push("model_mean_vector_divergence", fmt_f64(model_stat));
    s.push("inversion_mean_vector_divergence", fmt_f64(inversion_stat));
    s.push("mixture_mean_vector_divergence", fmt_f64(mixture_stat));
    s.push("scatter_i", i);
    s.push("scatter_j", j);
    s.push("scatter_pearson", fmt_f64(scatter.r));
    if let Some(dir) = out_dir {
        let m_model = mean_kde(&outputs, BandwidthMode::Silverman, &grid, Exec::default())?;
        let m_mix = mean_kde(&mixture, BandwidthMode::Silverman, &grid, Exec::default())?;
        let rows = (0..grid.len()).map(|k| vec![grid.point(k)[0], tab[k], m_model[k], m_mix[k]]);
        write_table(&dir.join("mean_kde.csv"), &["y", "target", "model", "mixture"], rows)?;
        write_table(
            &dir.join("scatter.csv"),
            &["y_i", "y_j"],
            scatter.pairs.iter().map(|&(a, b)| vec![a, b]),
        )?;
        let meta = format!("i = {i}\nj = {j}\npearson = {}\nseed = {seed}\n", fmt_f64(scatter.r));
        write_file(&dir.join("scatter_meta.txt"), &meta)?;
        write_history(dir, &history)?;
        write_file(&dir.join("summary.txt"), &s.render())?;
    }
    Ok((
        s,
        VectorRun {
            outputs,
            model_stat,
            inversion_stat,
        },
    ))
}

pub const MH_PROPOSAL_STD: f64 = 0.5;
pub const MH_BURN_IN: usize = 1_000;
pub const MH_SAMPLES: usize = 100_000;

/// The `y² exp(-|y|)` target on `[-12, 12]` used for the rejection and
/// Metropolis-Hastings comparison.
pub fn truncated_y2exp() -> Result<TargetDensity> {
    TargetDensity::y2exp(1.0)?.with_bounds(vec![(-12.0, 12.0)])
}

/// Model vs rejection sampling and Metropolis-Hastings.
pub fn fig3(scale: Scale, seed: u64, out_dir: Option<&Path>) -> Result<Summary> {
    let target = truncated_y2exp()?;
    let run = train_scalar(scalar_model_config(target.clone(), scale, seed)?, seed.wrapping_add(1))?;
    let proposal = TargetDensity::laplace().with_bounds(target.bounds().to_vec())?;
    let spec = RejectionSpec::with_grid_envelope(&target, proposal, &run.grid)?;
    let rej = rejection_sample(&target, &spec, EVAL_SAMPLES, &mut seeded_rng(seed.wrapping_add(2)))?;
    let mh_spec = MhSpec::new(MH_PROPOSAL_STD, None, MH_BURN_IN)?;
    let mh = metropolis_hastings(&target, &mh_spec, &run.grid, MH_SAMPLES, &mut seeded_rng(seed.wrapping_add(3)))?;

    let tab = &run.target_tab;
    let rej_div = divergence_to_target(&rej.samples, tab, &run.grid, &eval_kde(), Divergence::Symmetric)?;
    let mh_div = divergence_to_target(&mh.samples, tab, &run.grid, &eval_kde(), Divergence::Symmetric)?;

    let mut s = Summary::default();
    s.push("figure", "fig3");
    s.push("seed", seed);
    s.push("initial_divergence", fmt_f64(run.initial_divergence));
    s.push("model_divergence", fmt_f64(run.divergence));
    s.push("rejection_divergence", fmt_f64(rej_div));
    s.push("rejection_constant", fmt_f64(spec.constant()));
    s.push("rejection_acceptance_rate", fmt_f64(rej.acceptance_rate));
    s.push("mh_divergence", fmt_f64(mh_div));
    s.push("mh_burn_in", mh.burn_in);
    s.push("mh_acceptance_rate", fmt_f64(mh.acceptance_rate));
    if let Some(dir) = out_dir {
        let (lo, hi) = bounds_1d(&run.grid);
        write_hist(&dir.join("model_hist.csv"), &histogram(&run.samples, lo, hi, HIST_BINS)?)?;
        write_hist(&dir.join("rejection_hist.csv"), &histogram(&rej.samples, lo, hi, HIST_BINS)?)?;
        write_hist(&dir.join("mh_hist.csv"), &histogram(&mh.samples, lo, hi, HIST_BINS)?)?;
        write_target_1d(&dir.join("target.csv"), &run.grid, tab)?;
        write_history(dir, &run.history)?;
        write_file(&dir.join("summary.txt"), &s.render())?;
    }
    Ok(s)
}

/// The 2D model and a KDE of exact mixture samples against the 2D target.
pub fn fig4(scale: Scale, seed: u64, out_dir: Option<&Path>) -> Result<Summary> {
    let cfg = points_model_config(scale, seed)?;
    let grid = cfg.grid.clone();
    let target = cfg.target.clone();
    let trainer = Trainer::new(cfg)?;
    let tab = trainer.target_tab().to_vec();
    let eval_seed = seed.wrapping_add(1);
    let initial = sample_points(trainer.model(), EVAL_SAMPLES, &mut seeded_rng(eval_seed))?;
    let initial_div = divergence_to_target_2d(&initial, &tab, &grid, &eval_kde(), Divergence::Symmetric)?;
    let (model, history) = trainer.run()?;
    let points = sample_points(&model, EVAL_SAMPLES, &mut seeded_rng(eval_seed))?;
    let model_kde = kde_2d_auto(&points, BandwidthMode::Silverman, &grid)?;
    let model_div = Divergence::Symmetric.value(&model_kde, &tab, &grid, eval_kde().eps)?;

    let comps = target
        .gaussian_components()
        .ok_or_else(|| Error::invalid("target has no mixture form"))?;
    let exact: Vec<[f64; 2]> = mixture_sample_nd(&comps, EVAL_SAMPLES, &mut seeded_rng(seed.wrapping_add(2)))?
        .into_iter()
        .map(|p| [p[0], p[1]])
        .collect();
    let exact_kde = kde_2d_auto(&exact, BandwidthMode::Silverman, &grid)?;
    let exact_sup = exact_kde
        .iter()
        .zip(&tab)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut s = Summary::default();
    s.push("figure", "fig4");
    s.push("seed", seed);
    s.push("initial_divergence", fmt_f64(initial_div));
    s.push("model_divergence", fmt_f64(model_div));
    s.push("mixture_kde_sup_error", fmt_f64(exact_sup));
    if let Some(dir) = out_dir {
        write_surface(&dir.join("model_kde.csv"), &grid, &model_kde)?;
        write_surface(&dir.join("mixture_kde.csv"), &grid, &exact_kde)?;
        write_surface(&dir.join("target.csv"), &grid, &tab)?;
        write_history(dir, &history)?;
        write_file(&dir.join("summary.txt"), &s.render())?;
    }
    Ok(s)
}

/// Runs one figure pipeline and writes its files under `out_dir`.
pub fn reproduce(figure: Figure, scale: Scale, seed: u64, out_dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let dir = Some(out_dir);
    match figure {
        Figure::Fig1 => fig1(scale, seed, dir).map(|(s, _)| s),
        Figure::Fig2 => fig2(scale, seed, dir),
        Figure::Fig3 => fig3(scale, seed, dir),
        Figure::Fig4 => fig4(scale, seed, dir),
    }
}

/// Files each pipeline writes.
pub fn expected_files(figure: Figure) -> Vec<PathBuf> {
    let names: &[&str] = match figure {
        Figure::Fig1 => &["mean_kde.csv", "scatter.csv", "scatter_meta.txt", "history.csv", "summary.txt"],
        Figure::Fig2 => &["model_hist.csv", "inversion_hist.csv", "target.csv", "history.csv", "summary.txt"],
        Figure::Fig3 => &[
            "model_hist.csv",
            "rejection_hist.csv",
            "mh_hist.csv",
            "target.csv",
            "history.csv",
            "summary.txt",
        ],
        Figure::Fig4 => &["model_kde.csv", "mixture_kde.csv", "target.csv", "history.csv", "summary.txt"],
    };
    names.iter().map(PathBuf::from).collect()
}
