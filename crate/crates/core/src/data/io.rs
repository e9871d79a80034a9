//! Matrix and trace files.
//!
//! Matrices are plain comma-separated text or a small binary container:
//! the bytes `PMAT1`, then little-endian `u64` row and column counts, then
//! the entries as little-endian `f64` in row-major order. Every write goes
//! to a temporary file in the target directory that is renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::DatasetMatrix;
use crate::error::{Error, Result};
use crate::linalg::{Dense, SymMatrix};
use crate::solver::TraceRecord;

pub const MAGIC: &[u8; 5] = b"PMAT1";

/// Asymmetry tolerated in covariance files, relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

const TRACE_COLUMNS: [&str; 8] = [
    "iter",
    "elapsed_s",
    "objective",
    "step",
    "batch_n",
    "nnz",
    "rel_change",
    "rel_error",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.pmat` and `.bin` are binary; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pmat") | Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    JsonLines,
}

impl TraceFormat {
    /// `.jsonl` and `.json` are JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => TraceFormat::JsonLines,
            _ => TraceFormat::Csv,
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses comma-separated rows of numbers. Blank lines are ignored; with
/// `header` the first line is skipped. Lines and columns in errors are
/// 1-based.
pub fn parse_csv(text: &str, header: bool) -> Result<Dense<f64>> {
    let mut rows = 0;
    let mut cols = None;
    let mut data = Vec::new();
    for (idx, raw) in text.lines().enumerate().skip(usize::from(header)) {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, field) in raw.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(line, c + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(line, c + 1, format!("non-finite value {field:?}")));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(n) if n != count => {
                return Err(parse_error(
                    line,
                    count.min(n) + 1,
                    format!("expected {n} fields, found {count}"),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_error(1, 1, "no data rows"))?;
    Dense::from_row_major(rows, cols, data)
}

pub fn parse_binary(bytes: &[u8]) -> Result<Dense<f64>> {
    let header = MAGIC.len() + 16;
    if bytes.len() < header || &bytes[..MAGIC.len()] != MAGIC {
        return Err(parse_error(1, 1, "missing PMAT1 header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let rows = word(MAGIC.len()) as usize;
    let cols = word(MAGIC.len() + 8) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(header));
    if expected != Some(bytes.len()) {
        return Err(Error::dims(
            format!("{rows}x{cols} payload"),
            format!("{} bytes", bytes.len() - header),
        ));
    }
    let data: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        return Err(parse_error(k / cols.max(1) + 1, k % cols.max(1) + 1, "non-finite value"));
    }
    Dense::from_row_major(rows, cols, data)
}

pub fn encode_csv(m: &Dense<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_binary(m: &Dense<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAGIC.len() + 16 + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_dense(path: &Path, format: MatrixFormat, header: bool) -> Result<Dense<f64>> {
    match format {
        MatrixFormat::Csv => parse_csv(&fs::read_to_string(path)?, header),
        MatrixFormat::Binary => parse_binary(&fs::read(path)?),
    }
}

/// Reads a square matrix, checks symmetry to [`SYMMETRY_TOL`] and
/// symmetrizes.
pub fn read_covariance(path: &Path, format: MatrixFormat, header: bool) -> Result<SymMatrix<f64>> {
    SymMatrix::from_dense_checked(&read_dense(path, format, header)?, SYMMETRY_TOL)
}

pub fn read_dataset(path: &Path, format: MatrixFormat, header: bool) -> Result<DatasetMatrix<f64>> {
    DatasetMatrix::new(read_dense(path, format, header)?)
}

/// Writes `bytes` to `path` through a temporary file and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_dense(path: &Path, m: &Dense<f64>, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_atomic(path, encode_csv(m).as_bytes()),
        MatrixFormat::Binary => write_atomic(path, &encode_binary(m)),
    }
}

pub fn write_sym(path: &Path, m: &SymMatrix<f64>, format: MatrixFormat) -> Result<()> {
    write_dense(path, &m.to_dense(), format)
}

pub fn encode_trace(trace: &[TraceRecord], format: TraceFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        TraceFormat::Csv => {
            out.push_str(&TRACE_COLUMNS.join(","));
            out.push('\n');
            for t in trace {
                let fields = [
                    t.iter.to_string(),
                    format_float(t.elapsed_s),
                    format_float(t.objective),
                    format_float(t.step),
                    t.batch_n.map_or_else(String::new, |n| n.to_string()),
                    t.nnz.to_string(),
                    format_float(t.rel_change),
                    t.rel_error.map_or_else(String::new, format_float),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        TraceFormat::JsonLines => {
            for t in trace {
                out.push_str(&serde_json::to_string(t).map_err(|e| Error::InvalidArgument(e.to_string()))?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &[TraceRecord], format: TraceFormat) -> Result<()> {
    write_atomic(path, encode_trace(trace, format)?.as_bytes())
}

pub fn parse_trace(text: &str, format: TraceFormat) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    match format {
        TraceFormat::JsonLines => {
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str(line).map_err(|e| parse_error(idx + 1, e.column(), e.to_string()))?;
                out.push(rec);
            }
        }
        TraceFormat::Csv => {
            let mut lines = text.lines().enumerate();
            match lines.next() {
                Some((_, h)) if h.trim() == TRACE_COLUMNS.join(",") => {}
                _ => return Err(parse_error(1, 1, "missing trace header")),
            }
            for (idx, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                if f.len() != TRACE_COLUMNS.len() {
                    return Err(parse_error(
                        idx + 1,
                        f.len().min(TRACE_COLUMNS.len()) + 1,
                        format!("expected {} fields, found {}", TRACE_COLUMNS.len(), f.len()),
                    ));
                }
                let num = |c: usize| -> Result<f64> {
                    f[c].parse()
                        .map_err(|_| parse_error(idx + 1, c + 1, format!("not a number: {:?}", f[c])))
                };
                let int = |c: usize| -> Result<u64> {
                    f[c].parse()
                        .map_err(|_| parse_error(idx + 1, c + 1, format!("not an integer: {:?}", f[c])))
                };
                out.push(TraceRecord {
                    iter: int(0)?,
                    elapsed_s: num(1)?,
                    objective: num(2)?,
                    step: num(3)?,
                    batch_n: if f[4].is_empty() { None } else { Some(int(4)?) },
                    nnz: int(5)?,
                    rel_change: num(6)?,
                    rel_error: if f[7].is_empty() { None } else { Some(num(7)?) },
                });
            }
        }
    }
    Ok(out)
}

pub fn read_trace(path: &Path, format: TraceFormat) -> Result<Vec<TraceRecord>> {
    parse_trace(&fs::read_to_string(path)?, format)
}
