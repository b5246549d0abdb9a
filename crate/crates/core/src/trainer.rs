//! Training loop: uniform inputs, forward pass, loss, backward pass, Adam step.

use std::path::PathBuf;

use ndarray::Array2;
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::loss::{total_loss, LossBreakdown, LossConfig};
use crate::nn::{Architecture, Mlp, SampleBatch};
use crate::optim::{AdamConfig, AdamState};
use crate::targets::{tabulate, TargetDensity};

/// RNG used for every seeded stream in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub target: TargetDensity,
    pub grid: EvalGrid,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    pub batch_rows: usize,
    /// Training budget in input vectors; the run takes `⌊inputs / batch_rows⌋` steps.
    pub inputs: usize,
    pub seed: u64,
    /// Record every `log_every`-th step (the last step is always recorded).
    pub log_every: usize,
    pub checkpoint: Option<PathBuf>,
}

impl TrainConfig {
    /// Defaults around an architecture and target: grid of 256 nodes (64 per
    /// axis in 2D) over the target bounds, 32 batch rows, one step logged each time.
    pub fn new(architecture: Architecture, target: TargetDensity, inputs: usize) -> Result<Self> {
        let points = if target.dim() == 2 { 64 } else { 256 };
        let grid = target.default_grid(points)?;
        Ok(Self {
            architecture,
            target,
            grid,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            batch_rows: 32,
            inputs,
            seed: 0,
            log_every: 1,
            checkpoint: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.inputs / self.batch_rows.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.architecture;
        if a.input_dim == 0 || a.layers == 0 || a.units == 0 || a.output_dim == 0 {
            return Err(Error::invalid(format!("architecture dimensions must be >= 1: {a:?}")));
        }
        if self.batch_rows == 0 || self.inputs < self.batch_rows {
            return Err(Error::invalid(format!(
                "need inputs >= batch_rows >= 1, got inputs={} batch_rows={}",
                self.inputs, self.batch_rows
            )));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be >= 1"));
        }
        if self.grid.dim() != self.target.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.target.dim(),
                got: self.grid.dim(),
            });
        }
        if self.target.dim() == 2 && a.output_dim % 2 != 0 {
            return Err(Error::invalid(format!(
                "2D target needs an even output dimension, got {}",
                a.output_dim
            )));
        }
        self.loss.kde.validate()?;
        self.adam.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub step: usize,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    entries: Vec<HistoryEntry>,
}

impl LossHistory {
    pub fn push(&mut self, step: usize, loss: LossBreakdown) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if step <= last.step {
                return Err(Error::invalid(format!(
                    "history steps must increase: {step} after {}",
                    last.step
                )));
            }
        }
        self.entries.push(HistoryEntry { step, loss });
        Ok(())
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first(&self) -> Option<&HistoryEntry> {
        self.entries.first()
    }

    pub fn last(&self) -> Option<&HistoryEntry> {
        self.entries.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,row_term,col_term,well_term,total\n");
        for e in &self.entries {
            let l = e.loss;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.step,
                crate::csv::fmt_f64(l.row_term),
                crate::csv::fmt_f64(l.col_term),
                crate::csv::fmt_f64(l.well_term),
                crate::csv::fmt_f64(l.total)
            ));
        }
        out
    }
}

/// `rows × cols` i.i.d. Uniform(-1, 1) entries.
pub fn make_input_batch<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> SampleBatch {
    Array2::from_shape_simple_fn((rows, cols), || {
        let u: f64 = rng.sample(Open01);
        2.0 * u - 1.0
    })
}

/// Stepwise trainer. Model initialization and every input batch come from one
/// seeded stream, so a config fixes the whole run.
pub struct Trainer {
    cfg: TrainConfig,
    model: Mlp,
    adam: AdamState,
    rng: SeededRng,
    target_tab: Vec<f64>,
    step: usize,
    history: LossHistory,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded_rng(cfg.seed);
        let model = Mlp::new_glorot(cfg.architecture, &mut rng)?;
        let adam = AdamState::new(cfg.adam, model.param_count())?;
        let target_tab = tabulate(&cfg.target, &cfg.grid)?;
        Ok(Self {
            cfg,
            model,
            adam,
            rng,
            target_tab,
            step: 0,
            history: LossHistory::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn target_tab(&self) -> &[f64] {
        &self.target_tab
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn history(&self) -> &LossHistory {
        &self.history
    }

    /// Runs one optimizer step and returns the loss of the batch it used.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let inputs = make_input_batch(self.cfg.batch_rows, self.cfg.architecture.input_dim, &mut self.rng);
        let step = self.step;
        let overflow = |e| match e {
            Error::NumericOverflow { .. } => Error::NonFiniteLoss { step },
            other => other,
        };
        let (outputs, cache) = self.model.forward(&inputs).map_err(overflow)?;
        let eval = total_loss(&outputs, &self.target_tab, &self.cfg.grid, &self.cfg.loss)
            .map_err(overflow)?;
        if !eval.breakdown.is_finite() {
            return Err(Error::NonFiniteLoss { step: self.step });
        }
        let grads = self.model.backward(&cache, &eval.grad)?.flatten();
        let mut params = self.model.flat_params();
        self.adam.step(&mut params, &grads)?;
        self.model.set_flat_params(&params)?;

        let last = self.step + 1 == self.cfg.steps();
        if self.step % self.cfg.log_every == 0 || last {
            self.history.push(self.step, eval.breakdown)?;
            log::debug!("step {} loss {:.6e}", self.step, eval.breakdown.total);
        }
        self.step += 1;
        Ok(eval.breakdown)
    }

    /// Runs the remaining steps, writes the checkpoint if configured, and
    /// returns the model with its history.
    pub fn run(mut self) -> Result<(Mlp, LossHistory)> {
        let steps = self.cfg.steps();
        while self.step < steps {
            self.step()?;
        }
        if let Some(path) = &self.cfg.checkpoint {
            checkpoint::save_checkpoint(&self.model, path)?;
        }
        Ok((self.model, self.history))
    }
}

pub fn train(cfg: TrainConfig) -> Result<(Mlp, LossHistory)> {
    Trainer::new(cfg)?.run()
}

/// Feeds `⌈count / output_dim⌉` fresh input vectors through the model and
/// returns the first `count` output values in row-major order.
pub fn sample_model<R: Rng + ?Sized>(model: &Mlp, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    let out_dim = model.output_dim();
    let rows = count.div_ceil(out_dim);
    let mut values = Vec::with_capacity(rows * out_dim);
    const CHUNK: usize = 4096;
    let mut done = 0;
    while done < rows {
        let take = CHUNK.min(rows - done);
        let inputs = make_input_batch(take, model.input_dim(), rng);
        values.extend(model.predict(&inputs)?.iter().copied());
        done += take;
    }
    values.truncate(count);
    Ok(values)
}

/// Samples `count` 2D points; consecutive output pairs form one point.
pub fn sample_points<R: Rng + ?Sized>(model: &Mlp, count: usize, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    if model.output_dim() % 2 != 0 {
        return Err(Error::invalid(format!(
            "point sampling needs an even output dimension, got {}",
            model.output_dim()
        )));
    }
    let values = sample_model(model, 2 * count, rng)?;
    Ok(values.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}
