//! File helpers: CSV matrices in, fixed-precision JSON and CSV out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

const MODULE: &str = "io";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

/// `path` relative to `base` unless already absolute.
pub fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Rows of comma- or whitespace-separated numbers. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_csv_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: '{f}' is not a number", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config("CSV has no rows".into()));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::shape(MODULE, "CSV rows have different lengths"));
    }
    Ok(rows)
}

pub fn read_csv_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_csv_rows(&read_text(path)?).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_square_matrix(path: &Path) -> Result<SquareMatrix> {
    SquareMatrix::from_rows(&read_csv_rows(path)?)
}

/// 17 significant digits; empty for NaN so CSV readers see a missing value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_opt_bool(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

/// Rewrites every non-integer number to 17 significant digits.
fn fix_precision(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => match n.as_f64() {
            Some(x) if x.is_finite() => {
                Value::Number(fmt_f64(x).parse::<Number>().expect("formatted float parses"))
            }
            _ => Value::Null,
        },
        Value::Array(items) => Value::Array(items.into_iter().map(fix_precision).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, fix_precision(v))).collect()),
        other => other,
    }
}

pub fn to_json_value<T: Serialize>(value: &T) -> Result<Value> {
    Ok(serde_json::to_value(value)?)
}

/// Pretty JSON with floats at 17 significant digits and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let fixed = fix_precision(to_json_value(value)?);
    let mut s = serde_json::to_string_pretty(&fixed)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

/// Simple CSV writer for rows that are already formatted.
pub struct CsvBuilder {
    out: String,
    width: usize,
}

impl CsvBuilder {
    pub fn new(header: &[String]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Self {
            out,
            width: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.width);
        let _ = writeln!(self.out, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.out
    }
}
