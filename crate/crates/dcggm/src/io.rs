//! File formats: headerless CSV for matrices and samples, JSON sidecars.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dcggm_core::{Dataset, GroundTruth, Samples, SymMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Shortest text that parses back to the same `f64`; scientific notation
/// outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_rows<'a>(path: &Path, rows: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    let file = File::create(path).map_err(AppError::io(path))?;
    let mut out = BufWriter::new(file);
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(AppError::io(path))?;
    }
    out.flush().map_err(AppError::io(path))
}

fn read_rows(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::format(path, e.to_string()))?;
    let (mut rows, mut cols, mut data) = (0, 0, Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| AppError::format(path, e.to_string()))?;
        if rows == 0 {
            cols = record.len();
        }
        for field in &record {
            let v: f64 = field
                .parse()
                .map_err(|_| AppError::format(path, format!("line {}: not a number: {field:?}", rows + 1)))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((rows, cols, data))
}

pub fn write_matrix(path: &Path, m: &SymMatrix) -> Result<()> {
    write_rows(path, (0..m.dim()).map(|j| m.row(j)))
}

pub fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let (rows, cols, data) = read_rows(path)?;
    if rows == 0 || rows != cols {
        return Err(AppError::format(path, format!("expected a square matrix, found {rows} rows of {cols} fields")));
    }
    Ok(SymMatrix::from_row_major(rows, data)?)
}

pub fn write_samples(path: &Path, x: &Samples) -> Result<()> {
    write_rows(path, (0..x.rows()).map(|i| x.row(i)))
}

pub fn read_samples(path: &Path) -> Result<Samples> {
    let (rows, cols, data) = read_rows(path)?;
    if rows == 0 {
        return Err(AppError::format(path, "no samples"));
    }
    Ok(Samples::from_row_major(rows, cols, data)?)
}

/// Sidecar written next to a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub kind: String,
    pub p: usize,
    pub n: usize,
    pub n_edges: usize,
    pub seed: u64,
    pub zeta: f64,
    /// 0-based `[j, k]` pairs with `j < k`.
    pub support: Vec<[usize; 2]>,
}

impl Meta {
    pub fn new(truth: &GroundTruth, data: &Dataset) -> Self {
        Meta {
            kind: truth.kind.as_str().to_string(),
            p: truth.omega_true.dim(),
            n: data.n,
            n_edges: truth.n_nonzero,
            seed: data.seed,
            zeta: data.zeta,
            support: truth.support.iter().map(|&(j, k)| [j, k]).collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(AppError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-4, 9.99e-5, 123456.789, 1e15, -2.5e-300, f64::MAX, f64::MIN_POSITIVE] {
            let t = fmt_f64(x);
            assert_eq!(t.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{t}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(1e-5), "1e-5");
    }
}
