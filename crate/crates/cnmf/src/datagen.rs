//! Synthetic data generation and matrix file ingestion.
//!
//! Synthetic matrices follow the exact-low-rank lognormal recipe: ground
//! truth factors with i.i.d. exp(standard normal) entries and X = UVᵀ.
//! The PRNG is a named, versioned, counter-based stream (ChaCha8 via
//! 53-bit uniforms and Box–Muller), so seeds reproduce bit-identically
//! across platforms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::matio::{self, fmt_f64};
use crate::objectives::FactorPair;
use crate::rng::SeededStream;

/// Ceiling on dense matrix entries (2^27 ≈ 134M) for generation and file
/// loading; larger requests must override explicitly via
/// [`load_matrix_with_budget`]. Keeps accidental full-scale materialization
/// from slipping into experiments.
pub const DENSE_BUDGET: usize = 1 << 27;

/// Entry distribution for synthetic ground-truth factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    #[default]
    StandardLognormal,
}

/// Recipe for an exact-rank-r nonnegative matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    #[serde(default)]
    pub distribution: Distribution,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return Err(Error::InvalidDim(format!(
                "synthetic dimensions must be positive, got m={}, n={}, r={}",
                self.m, self.n, self.r
            )));
        }
        if self.r > self.m.min(self.n) {
            return Err(Error::InvalidDim(format!(
                "synthetic rank r={} exceeds min(m, n) = {}",
                self.r,
                self.m.min(self.n)
            )));
        }
        if self.m.saturating_mul(self.n) > DENSE_BUDGET {
            return Err(Error::DimOverflow {
                rows: self.m,
                cols: self.n,
                budget: DENSE_BUDGET,
            });
        }
        Ok(())
    }
}

/// Draws ground-truth factors with i.i.d. standard-lognormal entries and
/// returns X = UVᵀ together with them. X is entrywise positive and has
/// numerical rank exactly r; output is deterministic per seed.
pub fn synthetic_lognormal(spec: &SyntheticSpec) -> Result<(DenseMatrix, FactorPair)> {
    spec.validate()?;
    let mut stream = SeededStream::new(spec.seed);
    let u = DenseMatrix::from_fn(spec.m, spec.r, |_, _| stream.next_standard_lognormal());
    let v = DenseMatrix::from_fn(spec.n, spec.r, |_, _| stream.next_standard_lognormal());
    let x = u.mul_tr(&v)?;
    Ok((x, FactorPair::new(u, v)?))
}

/// On-disk matrix formats understood by [`load_matrix`] / [`save_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    /// Comma-separated rows, no header, one matrix row per line.
    CsvDense,
    /// MatrixMarket coordinate real general, 1-based indices, densified
    /// on load with unspecified entries zero.
    MatrixMarket,
}

/// Loads a nonnegative dense matrix with the default dense budget.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    load_matrix_with_budget(path, format, DENSE_BUDGET)
}

/// [`load_matrix`] with an explicit entry budget override.
pub fn load_matrix_with_budget(
    path: &Path,
    format: MatrixFormat,
    budget: usize,
) -> Result<DenseMatrix> {
    let x = match format {
        MatrixFormat::CsvDense => matio::read_csv_matrix(path, budget)?,
        MatrixFormat::MatrixMarket => read_matrix_market(path, budget)?,
    };
    if let Some((row, col, value)) = x.first_negative() {
        return Err(Error::NegativeData { row, col, value });
    }
    Ok(x)
}

/// Writes a matrix in the chosen format; the exact inverse of
/// [`load_matrix`] for nonnegative data.
pub fn save_matrix(path: &Path, x: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::CsvDense => matio::write_csv_matrix(path, x),
        MatrixFormat::MatrixMarket => write_matrix_market(path, x),
    }
}

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

fn read_matrix_market(path: &Path, budget: usize) -> Result<DenseMatrix> {
    use std::io::{BufRead, BufReader};
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let first = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::ParseError {
                line: 1,
                message: "empty MatrixMarket file".into(),
            })
        }
    };
    if !first.trim().eq_ignore_ascii_case(MM_HEADER) {
        return Err(Error::ParseError {
            line: 1,
            message: format!("expected header '{MM_HEADER}', got '{}'", first.trim()),
        });
    }

    // Size line: first non-comment, non-blank line after the header.
    let mut size: Option<(usize, usize, usize)> = None;
    let mut size_line_no = 0;
    for (idx, line) in &mut lines {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("size line needs 'rows cols nnz', got '{trimmed}'"),
            });
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::ParseError {
                line: line_no,
                message: format!("bad size field '{s}'"),
            })
        };
        size = Some((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?));
        size_line_no = line_no;
        break;
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::ParseError {
        line: size_line_no.max(1),
        message: "missing size line".into(),
    })?;
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDim(format!(
            "MatrixMarket size {rows}x{cols} must be positive"
        )));
    }
    if rows.saturating_mul(cols) > budget {
        return Err(Error::DimOverflow {
            rows,
            cols,
            budget,
        });
    }

    let mut data = vec![0.0; rows * cols];
    let mut seen = 0usize;
    for (idx, line) in &mut lines {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("entry needs 'row col value', got '{trimmed}'"),
            });
        }
        let i: usize = parts[0].parse().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("bad row index '{}'", parts[0]),
        })?;
        let j: usize = parts[1].parse().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("bad column index '{}'", parts[1]),
        })?;
        let value: f64 = parts[2].parse().map_err(|_| Error::ParseError {
            line: line_no,
            message: format!("bad value '{}'", parts[2]),
        })?;
        if i == 0 || i > rows || j == 0 || j > cols {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("index ({i}, {j}) outside 1-based {rows}x{cols}"),
            });
        }
        if !value.is_finite() {
            return Err(Error::NonFiniteData {
                row: i - 1,
                col: j - 1,
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeData {
                row: i - 1,
                col: j - 1,
                value,
            });
        }
        // Duplicate coordinates accumulate, the common convention for
        // coordinate-format assemblies.
        data[(i - 1) * cols + (j - 1)] += value;
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::ParseError {
            line: size_line_no,
            message: format!("size line promised {nnz} entries, file has {seen}"),
        });
    }
    DenseMatrix::from_vec(rows, cols, data)
}

fn write_matrix_market(path: &Path, x: &DenseMatrix) -> Result<()> {
    use std::io::{BufWriter, Write};
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let mut nnz = 0usize;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if x.get(i, j) != 0.0 {
                nnz += 1;
            }
        }
    }
    writeln!(w, "{MM_HEADER}")?;
    writeln!(w, "{} {} {}", x.rows(), x.cols(), nnz)?;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            let v = x.get(i, j);
            if v != 0.0 {
                writeln!(w, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
