//! Shared CSV conventions: comma-separated, header row, floats written with
//! 17 significant digits so every `f64` round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::gradcore::Tensor;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `(name, rows, cols, values...)` lines, one tensor per line.
pub fn write_named_tensors(path: &Path, tensors: &[(String, &Tensor)]) -> Result<(), CsvError> {
    let io = |source| CsvError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for (name, t) in tensors {
        write!(out, "{},{},{}", name, t.rows(), t.cols()).map_err(io)?;
        for &v in t.data() {
            write!(out, ",{}", fmt_f64(v)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_named_tensors(path: &Path) -> Result<Vec<(String, Tensor)>, CsvError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: p.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| CsvError::Parse {
            path: p.clone(),
            line: i + 1,
            msg,
        };
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or_default().to_string();
        let mut dim = |what: &str| -> Result<usize, CsvError> {
            fields
                .next()
                .ok_or_else(|| err(format!("missing {what}")))?
                .trim()
                .parse()
                .map_err(|e| err(format!("bad {what}: {e}")))
        };
        let rows = dim("rows")?;
        let cols = dim("cols")?;
        let values = fields
            .map(|f| f.trim().parse::<f64>().map_err(|e| err(format!("bad value {f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let t = Tensor::new(rows, cols, values).map_err(|e| err(e.to_string()))?;
        out.push((name, t));
    }
    Ok(out)
}
