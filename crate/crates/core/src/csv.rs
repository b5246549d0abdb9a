//! Minimal CSV reading and writing: `.` decimal separator, `\n` line ends,
//! a header row and 17-significant-digit floats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a header plus numeric rows.
pub fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_f64(v))).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    write_file(path, &render(header, rows))
}

/// Numeric table parsed from CSV text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// All values in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

/// Parses CSV text. A first record that does not parse as numbers is taken
/// as the header; every data row must have the same width.
pub fn parse(text: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                offset: 0,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(record.len());
        let mut bad = None;
        let mut offset = 0;
        for field in record.iter() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    bad = Some((offset, field.to_string()));
                    break;
                }
            }
            offset += field.len() + 1;
        }
        match bad {
            Some(_) if header.is_none() && rows.is_empty() => {
                header = Some(record.iter().map(str::to_string).collect());
            }
            Some((offset, field)) => {
                return Err(Error::Parse {
                    line,
                    offset,
                    message: format!("`{field}` is not a number"),
                })
            }
            None => rows.push(row),
        }
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_rows() {
        let t = parse("y1,y2\n1.0,2.0\n\n-3e-2,4\n").unwrap();
        assert_eq!(t.header.unwrap(), vec!["y1", "y2"]);
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![-0.03, 4.0]]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("value\n1.0\n2.0\nabc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = parse("a,b\n1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse("a,b\n1,2\n2,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, offset: 2, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(v);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
