//! Versioned plain-text model checkpoints.
//!
//! ```text
//! NNSAMPLER v1
//! layers <L>
//! <rows> <cols>            (per layer)
//! <w_00> <w_01> ...        (one line per weight row)
//! <b_0> <b_1> ...          (biases)
//! ```
//!
//! Floats use 17 significant digits so the round trip is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::csv::fmt_f64;
use crate::error::{Error, Result};
use crate::nn::{DenseLayer, Mlp};

pub const MAGIC: &str = "NNSAMPLER";
pub const VERSION: &str = "v1";

pub fn to_string(model: &Mlp) -> String {
    let mut out = format!("{MAGIC} {VERSION}\nlayers {}\n", model.layers().len());
    for layer in model.layers() {
        out.push_str(&format!("{} {}\n", layer.out_units(), layer.in_units()));
        for row in layer.weights.rows() {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        let cells: Vec<String> = layer.biases.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                offset: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }
}

fn parse_numbers<T: std::str::FromStr>(line: usize, text: &str, expected: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(expected);
    let mut offset = 0;
    for tok in text.split(' ') {
        if !tok.is_empty() {
            out.push(tok.parse::<T>().map_err(|_| Error::Parse {
                line,
                offset,
                message: format!("`{tok}` is not a valid number"),
            })?);
        }
        offset += tok.len() + 1;
    }
    if out.len() != expected {
        return Err(Error::Parse {
            line,
            offset: 0,
            message: format!("expected {expected} values, found {}", out.len()),
        });
    }
    Ok(out)
}

pub fn from_str(text: &str) -> Result<Mlp> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (ln, header) = lines.next_line("header")?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(Error::Parse {
            line: ln,
            offset: 0,
            message: format!("missing `{MAGIC}` header"),
        });
    }
    let version = parts.next().unwrap_or("");
    if version != VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: VERSION.to_string(),
        });
    }
    let (ln, l) = lines.next_line("layer count")?;
    let count = l
        .strip_prefix("layers ")
        .and_then(|s| s.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Parse {
            line: ln,
            offset: 0,
            message: "expected `layers <count>`".into(),
        })?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, l) = lines.next_line("layer shape")?;
        let shape: Vec<usize> = parse_numbers(ln, l, 2)?;
        let (rows, cols) = (shape[0], shape[1]);
        let mut weights = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, l) = lines.next_line("weight row")?;
            weights.extend(parse_numbers::<f64>(ln, l, cols)?);
        }
        let (ln, l) = lines.next_line("biases")?;
        let biases: Vec<f64> = parse_numbers(ln, l, rows)?;
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((rows, cols), weights)
                .map_err(|e| Error::shape(e.to_string()))?,
            biases: Array1::from_vec(biases),
        });
    }
    Mlp::from_layers(layers)
}

pub fn save_checkpoint(model: &Mlp, path: &Path) -> Result<()> {
    crate::csv::write_file(path, &to_string(model))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}
