//! Run configuration: flat `key = value` files with optional `[section]`
//! headers, dotted keys and `--key value` command-line overrides.
//!
//! ```text
//! seed = 7
//! [model]
//! input_dim = 1
//! layers = 5
//! units = 64
//! [target]
//! name = laplace
//! ```
//!
//! Every key has a default; keys that are not set are reported once through
//! the logger, and unknown keys are an error. See [`KEYS`] for the full list.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::grid::EvalGrid;
use crate::kde::BandwidthMode;
use crate::loss::{KdeConfig, LossConfig, LossWeights, WellConfig};
use crate::nn::Architecture;
use crate::optim::AdamConfig;
use crate::targets::TargetDensity;
use crate::trainer::TrainConfig;

/// Every accepted key with its default. `auto` means "derived from the
/// target or the model" (see [`RunConfig::train_config`]).
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("model.input_dim", "1"),
    ("model.layers", "5"),
    ("model.units", "64"),
    ("model.output_dim", "auto"),
    ("target.name", "laplace"),
    ("target.b", "1"),
    ("grid.lo", "auto"),
    ("grid.hi", "auto"),
    ("grid.points", "auto"),
    ("kde.bandwidth", "silverman"),
    ("kde.eps", "1e-12"),
    ("well.slope", "1"),
    ("well.lo", "auto"),
    ("well.hi", "auto"),
    ("jsd.mode", "symmetric"),
    ("loss.compare", "jsd"),
    ("loss.row_weight", "1"),
    ("loss.col_weight", "1"),
    ("loss.well_weight", "1"),
    ("adam.lr", "0.001"),
    ("adam.beta1", "0.9"),
    ("adam.beta2", "0.999"),
    ("adam.eps", "1e-8"),
    ("train.batch_rows", "32"),
    ("train.inputs", "200000"),
    ("train.log_every", "10"),
    ("train.checkpoint", "model.ckpt"),
    ("train.history", "history.csv"),
    ("eval.count", "10000"),
    ("eval.bins", "100"),
];

/// A fully resolved set of key/value pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|&(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|&(k, _)| k == key)
}

/// Parses config text into `(key, value, line)` triples.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut section = String::new();
    let mut out: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                offset: 0,
                message: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let Some(eq) = raw.find('=') else {
            return Err(Error::Parse {
                line,
                offset: 0,
                message: "expected `key = value`".into(),
            });
        };
        let key = raw[..eq].trim();
        let value = raw[eq + 1..].trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                offset: 0,
                message: "empty key".into(),
            });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if let Some(prev) = out.iter().find(|e| e.0 == full) {
            return Err(Error::config(
                full,
                format!("set twice (lines {} and {line})", prev.2),
            ));
        }
        out.push((full, value.to_string(), line));
    }
    Ok(out)
}

/// Splits trailing `--key value` / `--key=value` arguments.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            return Err(Error::config(arg.clone(), "override must look like `--key value`"));
        };
        if let Some((k, v)) = body.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Error::config(body, "override is missing a value"))?;
            out.push((body.to_string(), v.clone()));
        }
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(key, format!("`{value}` is not a valid number")))
}

fn auto_or<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

impl RunConfig {
    /// Parses config text and applies defaults for keys it does not set.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let entries = parse_entries(text)?;
        for (key, value, line) in &entries {
            if !is_known(key) {
                return Err(Error::config(key.clone(), format!("unknown key (line {line})")));
            }
            cfg.values.insert(key.clone(), value.clone());
        }
        for &(key, default) in KEYS {
            if !entries.iter().any(|e| e.0 == key) {
                log::info!("config: `{key}` not set, using default `{default}`");
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_str(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Sets one key, rejecting unknown keys and malformed values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known(key) {
            return Err(Error::config(key, "unknown key"));
        }
        let old = self.values.insert(key.to_string(), value.to_string());
        if let Err(e) = self.validate() {
            if let Some(old) = old {
                self.values.insert(key.to_string(), old);
            }
            return Err(e);
        }
        Ok(())
    }

    /// Applies command-line overrides, logging each one.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (k, v) in overrides {
            let old = self.get(k).unwrap_or("").to_string();
            self.set(k, v)?;
            log::info!("config: override `{k}` = `{v}` (was `{old}`)");
        }
        Ok(())
    }

    /// `key = value` lines for every key, in key order.
    pub fn resolved(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn raw(&self, key: &str) -> &str {
        self.get(key).expect("all keys are present")
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        parse_num(key, self.raw(key))
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        auto_or(key, self.raw(key))
    }

    pub fn seed(&self) -> Result<u64> {
        self.num("seed")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        PathBuf::from(self.raw("train.checkpoint"))
    }

    pub fn history_path(&self) -> PathBuf {
        PathBuf::from(self.raw("train.history"))
    }

    pub fn eval_count(&self) -> Result<usize> {
        self.num("eval.count")
    }

    pub fn eval_bins(&self) -> Result<usize> {
        self.num("eval.bins")
    }

    pub fn target(&self) -> Result<TargetDensity> {
        let b: f64 = self.num("target.b")?;
        TargetDensity::from_name(self.raw("target.name"), Some(b))
            .map_err(|e| Error::config("target.name", e.to_string()))
    }

    pub fn bandwidth(&self) -> Result<BandwidthMode> {
        match self.raw("kde.bandwidth") {
            "silverman" => Ok(BandwidthMode::Silverman),
            v => {
                let h: f64 = parse_num("kde.bandwidth", v)?;
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::config("kde.bandwidth", "must be `silverman` or a positive number"));
                }
                Ok(BandwidthMode::Fixed(h))
            }
        }
    }

    pub fn divergence(&self) -> Result<Divergence> {
        match (self.raw("loss.compare"), self.raw("jsd.mode")) {
            ("mse", _) => Ok(Divergence::Mse),
            ("jsd", "symmetric") => Ok(Divergence::Symmetric),
            ("jsd", "mixture") => Ok(Divergence::Mixture),
            ("jsd", m) => Err(Error::config("jsd.mode", format!("expected symmetric or mixture, got `{m}`"))),
            (c, _) => Err(Error::config("loss.compare", format!("expected jsd or mse, got `{c}`"))),
        }
    }

    pub fn grid(&self, target: &TargetDensity) -> Result<EvalGrid> {
        let (tlo, thi) = target.bounds()[0];
        let lo = self.opt("grid.lo")?.unwrap_or(tlo);
        let hi = self.opt("grid.hi")?.unwrap_or(thi);
        let default_points = if target.dim() == 2 { 64 } else { 256 };
        let points = self.opt("grid.points")?.unwrap_or(default_points);
        let grid = match target.dim() {
            2 => EvalGrid::new_2d(lo, hi, points),
            _ => EvalGrid::new_1d(lo, hi, points),
        };
        grid.map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        Ok(LossConfig {
            kde: KdeConfig {
                bandwidth: self.bandwidth()?,
                eps: self.num("kde.eps")?,
            },
            divergence: self.divergence()?,
            well: WellConfig {
                lo: self.opt("well.lo")?,
                hi: self.opt("well.hi")?,
                slope: self.num("well.slope")?,
            },
            weights: LossWeights {
                row: self.num("loss.row_weight")?,
                col: self.num("loss.col_weight")?,
                well: self.num("loss.well_weight")?,
            },
            ..LossConfig::default()
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let target = self.target()?;
        let input_dim: usize = self.num("model.input_dim")?;
        let architecture = Architecture {
            input_dim,
            units: self.num("model.units")?,
            layers: self.num("model.layers")?,
            output_dim: self.opt("model.output_dim")?.unwrap_or(input_dim),
        };
        let grid = self.grid(&target)?;
        let cfg = TrainConfig {
            architecture,
            grid,
            target,
            loss: self.loss_config()?,
            adam: AdamConfig {
                lr: self.num("adam.lr")?,
                beta1: self.num("adam.beta1")?,
                beta2: self.num("adam.beta2")?,
                eps: self.num("adam.eps")?,
            },
            batch_rows: self.num("train.batch_rows")?,
            inputs: self.num("train.inputs")?,
            seed: self.seed()?,
            log_every: self.num("train.log_every")?,
            checkpoint: Some(self.checkpoint_path()),
        };
        cfg.validate().map_err(|e| Error::config("train", e.to_string()))?;
        Ok(cfg)
    }

    /// Checks that every value parses; cross-key constraints are left to
    /// [`RunConfig::train_config`].
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        for key in [
            "model.input_dim",
            "model.layers",
            "model.units",
            "train.batch_rows",
            "train.inputs",
            "train.log_every",
            "eval.count",
            "eval.bins",
        ] {
            let v: usize = self.num(key)?;
            if v == 0 {
                return Err(Error::config(key, "must be >= 1"));
            }
        }
        self.opt::<usize>("model.output_dim")?;
        self.opt::<usize>("grid.points")?;
        for key in ["grid.lo", "grid.hi", "well.lo", "well.hi"] {
            self.opt::<f64>(key)?;
        }
        for key in [
            "target.b",
            "kde.eps",
            "well.slope",
            "loss.row_weight",
            "loss.col_weight",
            "loss.well_weight",
            "adam.lr",
            "adam.beta1",
            "adam.beta2",
            "adam.eps",
        ] {
            self.num::<f64>(key)?;
        }
        self.bandwidth()?;
        self.divergence()?;
        self.target()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = RunConfig::from_str("[model]\nunits = 16\nlayers=3\n[train]\ninputs = 64\n").unwrap();
        let b = RunConfig::from_str("model.units = 16\nmodel.layers = 3\ntrain.inputs = 64\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get("model.units"), Some("16"));
        assert_eq!(a.get("adam.lr"), Some("0.001"));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_str("# comment\nmodel.widht = 3\n").unwrap_err();
        match err {
            Error::Config { key, message } => {
                assert_eq!(key, "model.widht");
                assert!(message.contains("line 2"));
            }
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::default().set("nope", "1").is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let err = RunConfig::from_str("adam.lr = fast\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "adam.lr"), "{err}");
        let err = RunConfig::from_str("jsd.mode = other\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "jsd.mode"));
        assert!(matches!(RunConfig::from_str("seed 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(RunConfig::from_str("seed = 1\nseed = 2\n").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::from_str("seed = 3\n").unwrap();
        let ov = parse_overrides(&["--seed".into(), "7".into(), "--model.units=8".into()]).unwrap();
        cfg.apply_overrides(&ov).unwrap();
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.get("model.units"), Some("8"));
        assert!(parse_overrides(&["--seed".into()]).is_err());
        assert!(parse_overrides(&["seed".into(), "1".into()]).is_err());
        let before = cfg.clone();
        assert!(cfg.set("adam.lr", "x").is_err());
        assert_eq!(cfg, before);
    }

    #[test]
    fn train_config_from_defaults() {
        let t = RunConfig::default().train_config().unwrap();
        assert_eq!(t.architecture, Architecture { input_dim: 1, units: 64, layers: 5, output_dim: 1 });
        assert_eq!(t.grid.len(), 256);
        assert_eq!(t.steps(), 200_000 / 32);

        let cfg = RunConfig::from_str(
            "target.name = bimodal2d\nmodel.input_dim = 32\nkde.bandwidth = 0.3\nloss.compare = mse\n",
        )
        .unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!(t.grid.dim(), 2);
        assert_eq!(t.architecture.output_dim, 32);
        assert_eq!(t.loss.kde.bandwidth, BandwidthMode::Fixed(0.3));
        assert_eq!(t.loss.divergence, Divergence::Mse);
    }

    #[test]
    fn resolved_lists_every_key() {
        let r = RunConfig::default().resolved();
        assert_eq!(r.lines().count(), KEYS.len());
        assert!(r.contains("kde.bandwidth = silverman\n"));
    }
}
