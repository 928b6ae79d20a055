//! Shared CSV primitives for matrices and vectors.
//!
//! Headerless comma-separated rows, one matrix row per line. Values are
//! written with Rust's shortest round-trip formatting (scientific notation
//! outside a mid-range magnitude window), so save → load is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};

/// Formats a value so `str::parse::<f64>` recovers it exactly, preferring
/// plain decimal in the mid-range and scientific notation elsewhere.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn write_csv_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.rows() {
        let mut first = true;
        for &v in m.row(i) {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            w.write_all(fmt_f64(v).as_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_csv_vector(path: &Path, v: &Vector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &x in v.as_slice() {
        w.write_all(fmt_f64(x).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field(field: &str, line_no: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::ParseError {
        line: line_no,
        message: format!("invalid number {field:?}"),
    })
}

/// Reads a CSV matrix of unknown shape, enforcing a total element budget.
pub(crate) fn read_csv_matrix(path: &Path, budget: usize) -> Result<DenseMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut data = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let mut count = 0usize;
        for field in trimmed.split(',') {
            data.push(parse_field(field, line_no)?);
            count += 1;
        }
        if rows == 0 {
            cols = count;
        } else if count != cols {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("expected {cols} fields, found {count}"),
            });
        }
        rows += 1;
        if rows.saturating_mul(cols) > budget {
            return Err(Error::DimOverflow { rows, cols, budget });
        }
    }
    if rows == 0 {
        return Err(Error::ParseError {
            line: 0,
            message: "empty matrix file".into(),
        });
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Reads a CSV matrix whose shape is known in advance; storage is allocated
/// exactly once at the expected size.
pub(crate) fn read_csv_matrix_exact(path: &Path, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut data = vec![0.0f64; rows * cols];
    let mut line = String::new();
    let mut row = 0usize;
    let mut line_no = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if row >= rows {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("more than the expected {rows} rows"),
            });
        }
        let mut col = 0usize;
        for field in trimmed.split(',') {
            if col >= cols {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("more than the expected {cols} fields"),
                });
            }
            data[row * cols + col] = parse_field(field, line_no)?;
            col += 1;
        }
        if col != cols {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("expected {cols} fields, found {col}"),
            });
        }
        row += 1;
    }
    if row != rows {
        return Err(Error::ParseError {
            line: line_no,
            message: format!("expected {rows} rows, found {row}"),
        });
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Reads a single-column CSV vector of known length.
pub(crate) fn read_csv_vector_exact(path: &Path, len: usize) -> Result<Vector> {
    let m = read_csv_matrix_exact(path, len, 1)?;
    Vector::from_vec(m.data().to_vec())
}
