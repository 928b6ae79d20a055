//! Sketch operators, shift corrections, and compressed data records.
//!
//! A sketch operator is a small measurement matrix applied to the data from
//! the left (`A·X`) or the right (`X·A`). Compressing a nonnegative matrix
//! produces a record holding the sketched data, row/column sums, cached
//! norms, and (two-sided) orthonormal range bases; solvers work from these
//! records alone and never look at the full matrix again.
//!
//! Multiplicative updates on sketched objectives additionally need a shift
//! correction σ large enough to cancel the negative entries of the sketch
//! Gram; [`shift_sigma`] and [`shift_sigma_regularized`] compute the minimal
//! certified values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_thin_truncating, singular_values, DenseMatrix, Vector};
use crate::matio;
use crate::rng::SeededStream;

/// Which side of the data a sketch operator multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// How a sketch operator was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchKind {
    GaussianIid,
    OrthonormalRows,
    Rangefinder,
}

/// A measurement matrix with provenance: k×m for left sketches, n×k for
/// right sketches.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    pub matrix: DenseMatrix,
    pub kind: SketchKind,
    pub side: Side,
    pub seed: u64,
}

impl SketchOperator {
    /// Sketch size k: rows for left operators, columns for right operators.
    pub fn k(&self) -> usize {
        match self.side {
            Side::Left => self.matrix.rows(),
            Side::Right => self.matrix.cols(),
        }
    }

    /// The data dimension this operator contracts: columns for left
    /// operators (m), rows for right operators (n).
    pub fn data_dim(&self) -> usize {
        match self.side {
            Side::Left => self.matrix.cols(),
            Side::Right => self.matrix.rows(),
        }
    }

    /// Largest deviation of A·Aᵀ (left) or AᵀA (right) from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = match self.side {
            Side::Left => self.matrix.mul_tr(&self.matrix).expect("square gram"),
            Side::Right => self.matrix.tr_mul(&self.matrix).expect("square gram"),
        };
        let k = g.rows();
        let mut defect = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g.get(i, j) - target).abs());
            }
        }
        defect
    }

    /// Errors unless the operator's rows (left) or columns (right) are
    /// orthonormal within `tol`.
    pub fn verify_orthonormal(&self, tol: f64) -> Result<()> {
        let defect = self.orthonormality_defect();
        if defect > tol {
            return Err(Error::NotOrthonormal(format!(
                "defect {defect:.3e} exceeds tolerance {tol:.3e}"
            )));
        }
        Ok(())
    }
}

/// Nonnegativity shift correction σ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSigma {
    pub value: f64,
}

impl ShiftSigma {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::Config(format!("sigma must be >= 0, got {value}")));
        }
        Ok(ShiftSigma { value })
    }
}

/// Everything a one-sided solver may touch: the operator, Y = A·X, the
/// column-sum vector 1ᵀX, and the cached data norm.
#[derive(Debug, Clone)]
pub struct CompressedOneSided {
    pub a: SketchOperator,
    /// Y = A·X, k×n.
    pub y: DenseMatrix,
    /// 1ₘᵀX, length n; entrywise nonnegative because X is.
    pub row_sums: Vector,
    /// ‖X‖_F.
    pub x_frob: f64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

/// Two-sided compressed record: sketches from both sides, both sum vectors,
/// and orthonormal bases of the captured column/row spaces.
#[derive(Debug, Clone)]
pub struct CompressedTwoSided {
    pub a1: SketchOperator,
    pub a2: SketchOperator,
    /// Y1 = A1·X, k1×n.
    pub y1: DenseMatrix,
    /// Y2 = X·A2, m×k2.
    pub y2: DenseMatrix,
    /// 1ₘᵀX, length n.
    pub row_sums: Vector,
    /// X·1ₙ, length m.
    pub col_sums: Vector,
    /// Orthonormal basis of col(X·A2), m×k2' (truncated if rank deficient).
    pub q1: DenseMatrix,
    /// Orthonormal basis of col((A1·X)ᵀ), n×k1'.
    pub q2: DenseMatrix,
    /// ‖X‖_F.
    pub x_frob: f64,
}

impl CompressedTwoSided {
    pub fn m(&self) -> usize {
        self.y2.rows()
    }

    pub fn n(&self) -> usize {
        self.y1.cols()
    }
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64, std: f64) -> DenseMatrix {
    let mut stream = SeededStream::new(seed);
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = std * stream.next_standard_normal();
    }
    m
}

/// Samples an i.i.d. Gaussian sketch of size k against a data dimension
/// `dim`: k×dim for the left side, dim×k for the right. The default
/// variance is 1/dim, which makes the operator approximately orthogonal
/// with high probability when k ≪ dim.
pub fn sample_gaussian_sketch(
    k: usize,
    dim: usize,
    seed: u64,
    variance: Option<f64>,
    side: Side,
) -> Result<SketchOperator> {
    if k == 0 || dim == 0 {
        return Err(Error::InvalidDim(format!(
            "sketch dims must be positive, got k={k}, dim={dim}"
        )));
    }
    let var = variance.unwrap_or(1.0 / dim as f64);
    if !(var > 0.0) {
        return Err(Error::Config(format!("variance must be positive, got {var}")));
    }
    let std = var.sqrt();
    let matrix = match side {
        Side::Left => gaussian_matrix(k, dim, seed, std),
        Side::Right => gaussian_matrix(dim, k, seed, std),
    };
    Ok(SketchOperator {
        matrix,
        kind: SketchKind::GaussianIid,
        side,
        seed,
    })
}

/// Samples a sketch with exactly orthonormal rows (left) or columns
/// (right), as the thin QR of a dim×k Gaussian draw. Requires k ≤ dim.
pub fn sample_orthonormal_sketch(k: usize, dim: usize, seed: u64, side: Side) -> Result<SketchOperator> {
    if k == 0 || dim == 0 {
        return Err(Error::InvalidDim(format!(
            "sketch dims must be positive, got k={k}, dim={dim}"
        )));
    }
    if k > dim {
        return Err(Error::InvalidDim(format!(
            "orthonormal sketch needs k <= dim, got k={k}, dim={dim}"
        )));
    }
    let g = gaussian_matrix(dim, k, seed, 1.0);
    let q = crate::linalg::qr_thin(&g)?;
    let matrix = match side {
        Side::Left => q.transpose(),
        Side::Right => q,
    };
    Ok(SketchOperator {
        matrix,
        kind: SketchKind::OrthonormalRows,
        side,
        seed,
    })
}

/// Data-adapted sketch from the randomized rangefinder: draw a Gaussian S,
/// orthonormalize X·S (left; Xᵀ·S for right), and use the basis transposed
/// as the operator. If X·S is rank deficient the basis is truncated, so the
/// returned operator may have k' < k.
pub fn rangefinder_sketch(x: &DenseMatrix, k: usize, seed: u64, side: Side) -> Result<SketchOperator> {
    let limit = x.rows().min(x.cols());
    if k == 0 || k > limit {
        return Err(Error::InvalidDim(format!(
            "rangefinder needs 1 <= k <= min(m, n) = {limit}, got k={k}"
        )));
    }
    let matrix = match side {
        Side::Left => {
            let s = gaussian_matrix(x.cols(), k, seed, 1.0);
            let sample = x.mul(&s)?;
            let (q, _rank) = qr_thin_truncating(&sample)?;
            q.transpose()
        }
        Side::Right => {
            let s = gaussian_matrix(x.rows(), k, seed, 1.0);
            let sample = x.tr_mul(&s)?; // XᵀS, n×k
            let (q, _rank) = qr_thin_truncating(&sample)?;
            q
        }
    };
    Ok(SketchOperator {
        matrix,
        kind: SketchKind::Rangefinder,
        side,
        seed,
    })
}

/// Scans the entries of the update Gram — AᵀA for left operators, A·Aᵀ for
/// right ones — without materializing it, returning the extreme values
/// (min, max of negative part handled by callers).
fn gram_min_entry(op: &SketchOperator) -> f64 {
    let a = &op.matrix;
    let mut min = f64::INFINITY;
    match op.side {
        Side::Left => {
            // Gram is AᵀA over the m columns of the k×m matrix.
            let (k, m) = (a.rows(), a.cols());
            let data = a.data();
            for i in 0..m {
                for j in i..m {
                    let mut s = 0.0;
                    for t in 0..k {
                        s += data[t * m + i] * data[t * m + j];
                    }
                    min = min.min(s);
                }
            }
        }
        Side::Right => {
            // Gram is A·Aᵀ over the n rows of the n×k matrix.
            let n = a.rows();
            for i in 0..n {
                for j in i..n {
                    min = min.min(crate::linalg::dot(a.row(i), a.row(j)));
                }
            }
        }
    }
    min
}

/// Minimal shift correction: the largest entrywise negative part of AᵀA
/// (left operators) or A·Aᵀ (right operators); zero when the Gram is
/// already nonnegative.
pub fn shift_sigma(op: &SketchOperator) -> ShiftSigma {
    let min = gram_min_entry(op);
    ShiftSigma {
        value: (-min).max(0.0),
    }
}

/// Minimal shift correction when a λ-weighted projector-complement penalty
/// participates in the updates: the larger of the negative-part maxima of
/// the Gram G and of G + λ(I − QQᵀ), where G is AᵀA (left) or A·Aᵀ (right)
/// and Q has orthonormal columns spanning the retained range.
pub fn shift_sigma_regularized(op: &SketchOperator, lambda: f64, q: &DenseMatrix) -> Result<ShiftSigma> {
    if lambda < 0.0 {
        return Err(Error::LambdaOutOfRange {
            lambda,
            allowed: "[0, inf)",
        });
    }
    let dim = match op.side {
        Side::Left => op.matrix.cols(),
        Side::Right => op.matrix.rows(),
    };
    if q.rows() != dim {
        return Err(Error::DimMismatch {
            context: "shift_sigma_regularized",
            details: format!("Q has {} rows, Gram dimension is {dim}", q.rows()),
        });
    }
    if lambda == 0.0 {
        return Ok(shift_sigma(op));
    }
    let a = &op.matrix;
    let mut min_plain = f64::INFINITY;
    let mut min_reg = f64::INFINITY;
    let mut scan = |i: usize, j: usize, g_ij: f64| {
        min_plain = min_plain.min(g_ij);
        let delta = if i == j { 1.0 } else { 0.0 };
        let reg = g_ij + lambda * (delta - crate::linalg::dot(q.row(i), q.row(j)));
        min_reg = min_reg.min(reg);
    };
    match op.side {
        Side::Left => {
            let (k, m) = (a.rows(), a.cols());
            let data = a.data();
            for i in 0..m {
                for j in i..m {
                    let mut s = 0.0;
                    for t in 0..k {
                        s += data[t * m + i] * data[t * m + j];
                    }
                    scan(i, j, s);
                }
            }
        }
        Side::Right => {
            let n = a.rows();
            for i in 0..n {
                for j in i..n {
                    scan(i, j, crate::linalg::dot(a.row(i), a.row(j)));
                }
            }
        }
    }
    let value = (-min_plain).max(0.0).max((-min_reg).max(0.0));
    Ok(ShiftSigma { value })
}

/// Shift correction computed from the small k×k Gram (A·Aᵀ for left
/// operators, AᵀA for right ones) instead of the update Gram. This is the
/// variant described alongside the reference experiments; the update-Gram
/// definition in [`shift_sigma`] is the one that certifies monotone
/// multiplicative updates.
pub fn shift_sigma_small_gram(op: &SketchOperator) -> ShiftSigma {
    let g = match op.side {
        Side::Left => op.matrix.mul_tr(&op.matrix).expect("square gram"),
        Side::Right => op.matrix.tr_mul(&op.matrix).expect("square gram"),
    };
    ShiftSigma {
        value: (-g.min_entry()).max(0.0),
    }
}

/// ε such that every singular value of the operator lies in [1−ε, 1+ε].
pub fn approx_orthogonality_epsilon(op: &SketchOperator) -> f64 {
    let sv = singular_values(&op.matrix);
    sv.as_slice()
        .iter()
        .fold(0.0f64, |acc, s| acc.max((s - 1.0).abs()))
}

fn check_nonnegative(x: &DenseMatrix) -> Result<()> {
    if let Some((row, col, value)) = x.first_negative() {
        return Err(Error::NegativeData { row, col, value });
    }
    Ok(())
}

/// Compresses nonnegative data with a left sketch: Y = A·X plus the column
/// sums 1ᵀX and the cached norm ‖X‖_F. This is the single pass over X (two
/// passes total when A itself came from the rangefinder).
pub fn compress_one_sided(x: &DenseMatrix, a: &SketchOperator) -> Result<CompressedOneSided> {
    check_nonnegative(x)?;
    if a.side != Side::Left {
        return Err(Error::DimMismatch {
            context: "compress_one_sided",
            details: "operator must be a left sketch".into(),
        });
    }
    if a.matrix.cols() != x.rows() {
        return Err(Error::DimMismatch {
            context: "compress_one_sided",
            details: format!("operator contracts {} rows, data has {}", a.matrix.cols(), x.rows()),
        });
    }
    let y = a.matrix.mul(x)?;
    Ok(CompressedOneSided {
        a: a.clone(),
        y,
        row_sums: x.ones_t_mul(),
        x_frob: x.frob_norm(),
        m: x.rows(),
        n: x.cols(),
        k: a.matrix.rows(),
    })
}

/// Compresses nonnegative data from both sides: Y1 = A1·X, Y2 = X·A2, both
/// sum vectors, and orthonormal bases Q1 of col(Y2) and Q2 of col(Y1ᵀ).
/// Rank-deficient sketches truncate the corresponding basis.
pub fn compress_two_sided(
    x: &DenseMatrix,
    a1: &SketchOperator,
    a2: &SketchOperator,
) -> Result<CompressedTwoSided> {
    check_nonnegative(x)?;
    if a1.side != Side::Left || a2.side != Side::Right {
        return Err(Error::DimMismatch {
            context: "compress_two_sided",
            details: "a1 must be a left sketch and a2 a right sketch".into(),
        });
    }
    if a1.matrix.cols() != x.rows() || a2.matrix.rows() != x.cols() {
        return Err(Error::DimMismatch {
            context: "compress_two_sided",
            details: format!(
                "data is {}x{}, a1 contracts {}, a2 contracts {}",
                x.rows(),
                x.cols(),
                a1.matrix.cols(),
                a2.matrix.rows()
            ),
        });
    }
    let y1 = a1.matrix.mul(x)?;
    let y2 = x.mul(&a2.matrix)?;
    let (q1, _) = qr_thin_truncating(&y2)?;
    let y1t = y1.transpose();
    let (q2, _) = qr_thin_truncating(&y1t)?;
    Ok(CompressedTwoSided {
        a1: a1.clone(),
        a2: a2.clone(),
        y1,
        y2,
        row_sums: x.ones_t_mul(),
        col_sums: x.mul_ones(),
        q1,
        q2,
        x_frob: x.frob_norm(),
    })
}

/// Manifest of a serialized one-sided record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressedManifest {
    pub kind: SketchKind,
    pub side: Side,
    pub seed: u64,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub x_frob: f64,
    pub sigma: f64,
}

/// Per-operator metadata in a two-sided manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorMeta {
    pub kind: SketchKind,
    pub side: Side,
    pub seed: u64,
    pub k: usize,
    pub sigma: f64,
}

/// Manifest of a serialized two-sided record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSidedManifest {
    pub m: usize,
    pub n: usize,
    pub x_frob: f64,
    pub left: OperatorMeta,
    pub right: OperatorMeta,
    pub q1_cols: usize,
    pub q2_cols: usize,
}

fn write_manifest<T: Serialize>(path: &Path, manifest: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Serializes a one-sided record into a directory: A.csv, Y.csv,
/// row_sums.csv, and manifest.json carrying the provenance and the given
/// shift σ.
pub fn save_compressed_one_sided(dir: &Path, c: &CompressedOneSided, sigma: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    matio::write_csv_matrix(&dir.join("A.csv"), &c.a.matrix)?;
    matio::write_csv_matrix(&dir.join("Y.csv"), &c.y)?;
    matio::write_csv_vector(&dir.join("row_sums.csv"), &c.row_sums)?;
    let manifest = CompressedManifest {
        kind: c.a.kind,
        side: c.a.side,
        seed: c.a.seed,
        k: c.k,
        m: c.m,
        n: c.n,
        x_frob: c.x_frob,
        sigma,
    };
    write_manifest(&dir.join("manifest.json"), &manifest)
}

/// Loads a one-sided record saved by [`save_compressed_one_sided`]. All
/// arrays are allocated exactly at the sizes declared in the manifest.
pub fn load_compressed_one_sided(dir: &Path) -> Result<(CompressedOneSided, CompressedManifest)> {
    let manifest: CompressedManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let a = matio::read_csv_matrix_exact(&dir.join("A.csv"), manifest.k, manifest.m)?;
    let y = matio::read_csv_matrix_exact(&dir.join("Y.csv"), manifest.k, manifest.n)?;
    let row_sums = matio::read_csv_vector_exact(&dir.join("row_sums.csv"), manifest.n)?;
    let record = CompressedOneSided {
        a: SketchOperator {
            matrix: a,
            kind: manifest.kind,
            side: manifest.side,
            seed: manifest.seed,
        },
        y,
        row_sums,
        x_frob: manifest.x_frob,
        m: manifest.m,
        n: manifest.n,
        k: manifest.k,
    };
    Ok((record, manifest))
}

/// Serializes a two-sided record into a directory (A1/A2/Y1/Y2/Q1/Q2 plus
/// both sum vectors and manifest.json).
pub fn save_compressed_two_sided(
    dir: &Path,
    c: &CompressedTwoSided,
    sigma1: f64,
    sigma2: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    matio::write_csv_matrix(&dir.join("A1.csv"), &c.a1.matrix)?;
    matio::write_csv_matrix(&dir.join("A2.csv"), &c.a2.matrix)?;
    matio::write_csv_matrix(&dir.join("Y1.csv"), &c.y1)?;
    matio::write_csv_matrix(&dir.join("Y2.csv"), &c.y2)?;
    matio::write_csv_matrix(&dir.join("Q1.csv"), &c.q1)?;
    matio::write_csv_matrix(&dir.join("Q2.csv"), &c.q2)?;
    matio::write_csv_vector(&dir.join("row_sums.csv"), &c.row_sums)?;
    matio::write_csv_vector(&dir.join("col_sums.csv"), &c.col_sums)?;
    let manifest = TwoSidedManifest {
        m: c.m(),
        n: c.n(),
        x_frob: c.x_frob,
        left: OperatorMeta {
            kind: c.a1.kind,
            side: c.a1.side,
            seed: c.a1.seed,
            k: c.a1.matrix.rows(),
            sigma: sigma1,
        },
        right: OperatorMeta {
            kind: c.a2.kind,
            side: c.a2.side,
            seed: c.a2.seed,
            k: c.a2.matrix.cols(),
            sigma: sigma2,
        },
        q1_cols: c.q1.cols(),
        q2_cols: c.q2.cols(),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)
}

/// Loads a two-sided record saved by [`save_compressed_two_sided`].
pub fn load_compressed_two_sided(dir: &Path) -> Result<(CompressedTwoSided, TwoSidedManifest)> {
    let manifest: TwoSidedManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let (m, n) = (manifest.m, manifest.n);
    let (k1, k2) = (manifest.left.k, manifest.right.k);
    let a1 = matio::read_csv_matrix_exact(&dir.join("A1.csv"), k1, m)?;
    let a2 = matio::read_csv_matrix_exact(&dir.join("A2.csv"), n, k2)?;
    let y1 = matio::read_csv_matrix_exact(&dir.join("Y1.csv"), k1, n)?;
    let y2 = matio::read_csv_matrix_exact(&dir.join("Y2.csv"), m, k2)?;
    let q1 = matio::read_csv_matrix_exact(&dir.join("Q1.csv"), m, manifest.q1_cols)?;
    let q2 = matio::read_csv_matrix_exact(&dir.join("Q2.csv"), n, manifest.q2_cols)?;
    let row_sums = matio::read_csv_vector_exact(&dir.join("row_sums.csv"), n)?;
    let col_sums = matio::read_csv_vector_exact(&dir.join("col_sums.csv"), m)?;
    let record = CompressedTwoSided {
        a1: SketchOperator {
            matrix: a1,
            kind: manifest.left.kind,
            side: manifest.left.side,
            seed: manifest.left.seed,
        },
        a2: SketchOperator {
            matrix: a2,
            kind: manifest.right.kind,
            side: manifest.right.side,
            seed: manifest.right.seed,
        },
        y1,
        y2,
        row_sums,
        col_sums,
        q1,
        q2,
        x_frob: manifest.x_frob,
    };
    Ok((record, manifest))
}
