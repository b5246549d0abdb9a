//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use crate::baselines::{
    inversion_sample, metropolis_hastings, mixture_sample, rejection_sample, MhSpec, MixtureSpec,
    RejectionSpec,
};
use crate::checkpoint::load_checkpoint;
use crate::config::{parse_overrides, RunConfig};
use crate::csv::{self, fmt_f64, render};
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::eval::{dependence_scatter, divergence_to_target, histogram, kde_2d_auto};
use crate::kde::{self, BandwidthMode};
use crate::loss::KdeConfig;
use crate::targets::{tabulate, TargetDensity};
use crate::experiments::{self, Figure, Scale};
use crate::trainer::{sample_model, sample_points, seeded_rng, train};

#[derive(Debug, Parser)]
#[command(name = "nnsampler", version, about = "Neural density sampler and classical baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a config file; trailing `--key value` pairs override it.
    Train {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Draw samples from a trained checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 1 for scalar samples, 2 to read consecutive outputs as (y1, y2) points.
        #[arg(long, default_value_t = 1)]
        point_dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples with a classical method.
    Baseline {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value = "laplace")]
        target: String,
        /// Shape parameter of the y2exp target.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metropolis-Hastings burn-in.
        #[arg(long, default_value_t = 1_000)]
        burn_in: usize,
        /// Metropolis-Hastings proposal standard deviation.
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        /// Working bounds; defaults to the target's own.
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 8192)]
        grid_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a samples CSV against a target.
    Eval {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = "laplace")]
        target: String,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// Evaluation grid nodes (per axis in 2D); defaults to 512 in 1D, 64 in 2D.
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the data behind one comparison figure.
    Reproduce {
        #[arg(long)]
        figure: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Inversion,
    Rejection,
    Mixture,
    Mh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Histogram,
    Kde,
    Kde2d,
    Jsd,
    Scatter,
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => csv::write_file(path, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn target_with_bounds(name: &str, b: Option<f64>, lo: Option<f64>, hi: Option<f64>) -> Result<TargetDensity> {
    let target = TargetDensity::from_name(name, b)?;
    if lo.is_none() && hi.is_none() {
        return Ok(target);
    }
    let (tlo, thi) = target.bounds()[0];
    let (lo, hi) = (lo.unwrap_or(tlo), hi.unwrap_or(thi));
    let dim = target.dim();
    target.with_bounds(vec![(lo, hi); dim])
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, overrides } => cmd_train(&config, &overrides),
        Command::Sample {
            checkpoint,
            count,
            seed,
            point_dim,
            out,
        } => cmd_sample(&checkpoint, count, seed, point_dim, out.as_deref()),
        Command::Baseline {
            method,
            target,
            b,
            count,
            seed,
            burn_in,
            sigma,
            lo,
            hi,
            grid_points,
            out,
        } => {
            let target = target_with_bounds(&target, b, lo, hi)?;
            cmd_baseline(method, &target, count, seed, burn_in, sigma, grid_points, out.as_deref())
        }
        Command::Eval {
            samples,
            target,
            b,
            mode,
            i,
            j,
            bins,
            grid_points,
            lo,
            hi,
            out,
        } => {
            let target = target_with_bounds(&target, b, lo, hi)?;
            cmd_eval(&samples, &target, mode, i, j, bins, grid_points, out.as_deref())
        }
        Command::Reproduce {
            figure,
            scale,
            seed,
            out_dir,
        } => {
            let figure: Figure = figure.parse()?;
            let scale: Scale = scale.parse()?;
            let summary = experiments::reproduce(figure, scale, seed, &out_dir)?;
            eprint!("{}", summary.render());
            Ok(())
        }
    }
}

pub fn cmd_train(config: &Path, overrides: &[String]) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    cfg.apply_overrides(&parse_overrides(overrides)?)?;
    for line in cfg.resolved().lines() {
        log::info!("resolved: {line}");
    }
    let train_cfg = cfg.train_config()?;
    log::info!(
        "training {:?} for {} steps on `{}`",
        train_cfg.architecture,
        train_cfg.steps(),
        train_cfg.target.name()
    );
    let (_, history) = train(train_cfg)?;
    csv::write_file(&cfg.history_path(), &history.to_csv())?;
    let last = history.last().ok_or(Error::Empty("loss history"))?;
    let l = last.loss;
    println!(
        "step = {}\nrow_term = {}\ncol_term = {}\nwell_term = {}\ntotal = {}",
        last.step,
        fmt_f64(l.row_term),
        fmt_f64(l.col_term),
        fmt_f64(l.well_term),
        fmt_f64(l.total)
    );
    Ok(())
}

pub fn cmd_sample(checkpoint: &Path, count: usize, seed: u64, point_dim: usize, out: Option<&Path>) -> Result<()> {
    let model = load_checkpoint(checkpoint)?;
    let mut rng = seeded_rng(seed);
    let text = match point_dim {
        1 => render(&["y"], sample_model(&model, count, &mut rng)?.into_iter().map(|v| vec![v])),
        2 => render(
            &["y1", "y2"],
            sample_points(&model, count, &mut rng)?.into_iter().map(|p| p.to_vec()),
        ),
        d => return Err(Error::invalid(format!("point dimension must be 1 or 2, got {d}"))),
    };
    emit(out, &text)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_baseline(
    method: Method,
    target: &TargetDensity,
    count: usize,
    seed: u64,
    burn_in: usize,
    sigma: f64,
    grid_points: usize,
    out: Option<&Path>,
) -> Result<()> {
    if count == 0 {
        return Err(Error::invalid("count must be >= 1"));
    }
    if target.dim() != 1 {
        return Err(Error::invalid("baselines sample 1D targets"));
    }
    let grid = target.default_grid(grid_points)?;
    let mut rng = seeded_rng(seed);
    let samples = match method {
        Method::Inversion => inversion_sample(target, &grid, count, &mut rng)?,
        Method::Rejection => {
            let proposal = TargetDensity::laplace().with_bounds(target.bounds().to_vec())?;
            let spec = RejectionSpec::with_grid_envelope(target, proposal, &grid)?;
            let out = rejection_sample(target, &spec, count, &mut rng)?;
            eprintln!("envelope_constant = {}", fmt_f64(spec.constant()));
            eprintln!("acceptance_rate = {}", fmt_f64(out.acceptance_rate));
            out.samples
        }
        Method::Mixture => {
            let spec = MixtureSpec::for_target(target).ok_or_else(|| {
                Error::invalid(format!("target `{}` has no Gaussian mixture form", target.name()))
            })?;
            mixture_sample(&spec, count, &mut rng)
        }
        Method::Mh => {
            let spec = MhSpec::new(sigma, None, burn_in)?;
            let out = metropolis_hastings(target, &spec, &grid, count, &mut rng)?;
            eprintln!("burn_in = {}", out.burn_in);
            eprintln!("acceptance_rate = {}", fmt_f64(out.acceptance_rate));
            out.samples
        }
    };
    emit(out, &render(&["y"], samples.into_iter().map(|v| vec![v])))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    samples: &Path,
    target: &TargetDensity,
    mode: EvalMode,
    i: Option<usize>,
    j: Option<usize>,
    bins: usize,
    grid_points: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let table = csv::read_table(samples)?;
    if table.rows.is_empty() {
        return Err(Error::Empty("samples file"));
    }
    match mode {
        EvalMode::Scatter => {
            let (Some(i), Some(j)) = (i, j) else {
                return Err(Error::invalid("scatter mode needs both --i and --j"));
            };
            let batch = Array2::from_shape_vec((table.rows.len(), table.width()), table.flatten())
                .map_err(|e| Error::shape(e.to_string()))?;
            let s = dependence_scatter(&batch, i, j)?;
            eprintln!("pearson = {}", fmt_f64(s.r));
            emit(out, &render(&["y_i", "y_j"], s.pairs.iter().map(|&(a, b)| vec![a, b])))
        }
        EvalMode::Kde2d => {
            if target.dim() != 2 {
                return Err(Error::invalid("kde2d mode needs a 2D target"));
            }
            if table.width() != 2 {
                return Err(Error::invalid(format!(
                    "kde2d mode needs two columns, found {}",
                    table.width()
                )));
            }
            let points: Vec<[f64; 2]> = table.rows.iter().map(|r| [r[0], r[1]]).collect();
            let grid = target.default_grid(grid_points.unwrap_or(64))?;
            let d = kde_2d_auto(&points, BandwidthMode::Silverman, &grid)?;
            let rows = (0..grid.len()).map(|k| {
                let p = grid.point(k);
                vec![p[0], p[1], d[k]]
            });
            emit(out, &render(&["y1", "y2", "density"], rows))
        }
        EvalMode::Histogram => {
            one_d(target)?;
            let (lo, hi) = target.bounds()[0];
            let h = histogram(&table.flatten(), lo, hi, bins)?;
            if h.overflow > 0 {
                log::warn!("{} samples fall outside [{lo}, {hi}]", h.overflow);
            }
            let rows = h.centers().into_iter().zip(h.heights).map(|(c, v)| vec![c, v]);
            emit(out, &render(&["y", "density"], rows))
        }
        EvalMode::Kde => {
            one_d(target)?;
            let values = table.flatten();
            let grid = target.default_grid(grid_points.unwrap_or(512))?;
            let h = kde::bandwidth_for(BandwidthMode::Silverman, &values)?;
            let d = kde::gaussian_kde(&values, h, &grid)?;
            let rows = (0..grid.len()).map(|k| vec![grid.point(k)[0], d[k]]);
            emit(out, &render(&["y", "density"], rows))
        }
        EvalMode::Jsd => {
            let grid = target.default_grid(grid_points.unwrap_or(if target.dim() == 2 { 64 } else { 512 }))?;
            let tab = tabulate(target, &grid)?;
            let value = match target.dim() {
                2 => {
                    let points: Vec<[f64; 2]> = table.flatten().chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                    crate::eval::divergence_to_target_2d(&points, &tab, &grid, &KdeConfig::default(), Divergence::Symmetric)?
                }
                _ => divergence_to_target(&table.flatten(), &tab, &grid, &KdeConfig::default(), Divergence::Symmetric)?,
            };
            emit(out, &format!("{}\n", fmt_f64(value)))
        }
    }
}

fn one_d(target: &TargetDensity) -> Result<()> {
    if target.dim() != 1 {
        return Err(Error::invalid("this mode needs a 1D target"));
    }
    Ok(())
}
