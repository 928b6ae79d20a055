//! Minimal dense linear algebra: matrices, thin QR, singular values, Gram
//! and trace utilities.
//!
//! Everything downstream (sketching, objectives, solvers, evaluation) works
//! in terms of [`DenseMatrix`] and [`Vector`]. The decompositions are
//! deliberately small-scale and deterministic: Householder QR with a fixed
//! sign convention, and singular values via a Jacobi eigensolve of the
//! smaller Gram matrix.

use crate::error::{Error, Result};

/// Relative tolerance (times ‖M‖_F) below which a column is rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Dense row-major matrix of `f64` values.
///
/// Invariants: `rows`, `cols` ≥ 1, `data.len() == rows * cols`, and all
/// entries are finite at construction. Mutation through `row_mut`/`data_mut`
/// is used by solvers, which re-establish finiteness checks themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDim(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                context: "DenseMatrix::from_vec",
                details: format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            });
        }
        for (idx, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds entrywise from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Transposed copy.
    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimMismatch {
                context: "DenseMatrix::mul",
                details: format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for j in 0..other.cols {
                    out_row[j] += a_ik * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// Transposed product `selfᵀ · other`, accumulated over rows so every
    /// access is contiguous.
    pub fn tr_mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimMismatch {
                context: "DenseMatrix::tr_mul",
                details: format!("{}x{} (transposed) times {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = other.row(i);
            for (p, &a_ip) in a_row.iter().enumerate() {
                if a_ip == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[p * other.cols..(p + 1) * other.cols];
                for q in 0..other.cols {
                    out_row[q] += a_ip * b_row[q];
                }
            }
        }
        Ok(out)
    }

    /// Product with a transpose, `self · otherᵀ` (rows dotted with rows).
    pub fn mul_tr(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::DimMismatch {
                context: "DenseMatrix::mul_tr",
                details: format!("{}x{} times {}x{} (transposed)", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a_row, other.row(j));
            }
        }
        Ok(out)
    }

    /// Squared Frobenius norm.
    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Column sums as a vector of length `cols` (`1ᵀM`).
    pub fn ones_t_mul(&self) -> Vector {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                sums[j] += v;
            }
        }
        Vector { data: sums }
    }

    /// Row sums as a vector of length `rows` (`M·1`).
    pub fn mul_ones(&self) -> Vector {
        let data = (0..self.rows).map(|i| self.row(i).iter().sum()).collect();
        Vector { data }
    }

    /// Minimum entry.
    pub fn min_entry(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    /// True if every entry is nonnegative.
    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// First strictly negative entry as (row, col, value), if any.
    pub fn first_negative(&self) -> Option<(usize, usize, f64)> {
        self.data
            .iter()
            .position(|&v| v < 0.0)
            .map(|idx| (idx / self.cols, idx % self.cols, self.data[idx]))
    }
}

/// Dense vector of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    /// Builds a vector, validating finiteness and non-emptiness.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidDim("vector length must be positive".into()));
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData { row: i, col: 0 });
            }
        }
        Ok(Vector { data })
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Vector { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Adds `coeff * src` into `dst`.
#[inline]
pub(crate) fn axpy(dst: &mut [f64], coeff: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for i in 0..dst.len() {
        dst[i] += coeff * src[i];
    }
}

/// Σ_j weights[j] · M_j (row-weighted sum), returned as a length-cols
/// buffer. Used for sum-vector penalties: sᵀV and friends.
pub(crate) fn weighted_row_sum(weights: &[f64], m: &DenseMatrix) -> Vec<f64> {
    debug_assert_eq!(weights.len(), m.rows());
    let mut acc = vec![0.0; m.cols()];
    for j in 0..m.rows() {
        axpy(&mut acc, weights[j], m.row(j));
    }
    acc
}

/// Adds `v × M` (a 1×rows row vector times the matrix) into `out`.
#[inline]
pub(crate) fn vec_mat_into(v: &[f64], m: &DenseMatrix, out: &mut [f64]) {
    debug_assert_eq!(v.len(), m.rows());
    debug_assert_eq!(out.len(), m.cols());
    for t in 0..m.rows() {
        axpy(out, v[t], m.row(t));
    }
}

/// Thin QR of an m×p matrix (p ≤ m) via Householder reflections.
///
/// Returns Q with orthonormal columns spanning the column space of `m`. The
/// sign convention fixes the implied triangular factor to a nonnegative
/// diagonal, so outputs are reproducible. Fails with
/// [`Error::RankDeficient`] when a column's residual norm after
/// orthogonalization drops below [`RANK_TOL`] × ‖M‖_F.
pub fn qr_thin(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (q, rank, first_deficient) = householder_qr(m)?;
    if let Some(column) = first_deficient {
        return Err(Error::RankDeficient { column });
    }
    debug_assert_eq!(rank, m.cols());
    Ok(q)
}

/// Thin QR that truncates at the first rank-deficient column instead of
/// failing: returns (Q with k' ≤ p columns, k').
pub fn qr_thin_truncating(m: &DenseMatrix) -> Result<(DenseMatrix, usize)> {
    let (q, rank, _) = householder_qr(m)?;
    if rank == m.cols() {
        return Ok((q, rank));
    }
    if rank == 0 {
        return Err(Error::RankDeficient { column: 0 });
    }
    let mut t = DenseMatrix::zeros(q.rows(), rank);
    for i in 0..q.rows() {
        t.row_mut(i).copy_from_slice(&q.row(i)[..rank]);
    }
    Ok((t, rank))
}

/// Least-squares solution of A·Z = B for a square or tall full-rank A
/// (rows ≥ cols), minimizing ‖A·Z − B‖_F column by column via Householder
/// QR and back-substitution. Fails with [`Error::RankDeficient`] when the
/// columns of A are not independent at working precision.
pub fn solve_least_squares(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::InvalidDim(format!(
            "solve_least_squares needs matching row counts, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let q = qr_thin(a)?;
    // R = QᵀA is upper triangular with nonnegative diagonal by the sign
    // convention of qr_thin; its strictly-lower part is rounding noise.
    let r = q.tr_mul(a)?;
    let rhs = q.tr_mul(b)?;
    let p = a.cols();
    let tol = RANK_TOL * a.frob_norm();
    let mut z = DenseMatrix::zeros(p, b.cols());
    for c in 0..b.cols() {
        for i in (0..p).rev() {
            let mut acc = rhs.get(i, c);
            for j in (i + 1)..p {
                acc -= r.get(i, j) * z.get(j, c);
            }
            let d = r.get(i, i);
            if d.abs() <= tol {
                return Err(Error::RankDeficient { column: i });
            }
            z.set(i, c, acc / d);
        }
    }
    Ok(z)
}

/// Householder QR engine: returns (thin Q over the first `rank` columns,
/// rank, first deficient column if any). Columns past the first deficiency
/// are left as padding in Q and must not be used.
fn householder_qr(m: &DenseMatrix) -> Result<(DenseMatrix, usize, Option<usize>)> {
    let rows = m.rows();
    let cols = m.cols();
    if cols > rows {
        return Err(Error::InvalidDim(format!(
            "qr_thin needs cols <= rows, got {rows}x{cols}"
        )));
    }
    let tol = RANK_TOL * m.frob_norm();
    let mut r = m.clone();
    // Householder vectors, one per processed column (length rows - j).
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cols);
    let mut diag_negative = vec![false; cols];
    let mut rank = cols;
    let mut first_deficient = None;

    for j in 0..cols {
        let mut norm_sq = 0.0;
        for i in j..rows {
            let v = r.get(i, j);
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm <= tol {
            rank = j;
            first_deficient = Some(j);
            break;
        }
        let x0 = r.get(j, j);
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        // v = x + sign(x0)·‖x‖·e1 makes the new diagonal entry -sign·‖x‖.
        let mut v = Vec::with_capacity(rows - j);
        v.push(x0 + sign * norm);
        for i in (j + 1)..rows {
            v.push(r.get(i, j));
        }
        let v_norm_sq = dot(&v, &v);
        let beta = if v_norm_sq > 0.0 { 2.0 / v_norm_sq } else { 0.0 };
        diag_negative[j] = sign > 0.0; // new diagonal is -sign·‖x‖

        // Apply H = I - beta·v·vᵀ to the trailing block of R.
        for c in j..cols {
            let mut proj = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                proj += vi * r.get(j + offset, c);
            }
            let scale = beta * proj;
            for (offset, vi) in v.iter().enumerate() {
                let val = r.get(j + offset, c) - scale * vi;
                r.set(j + offset, c, val);
            }
        }
        reflectors.push((v, beta));
    }

    // Accumulate Q = H_0 · … · H_{rank-1} applied to the leading identity
    // columns, working backwards.
    let mut q = DenseMatrix::zeros(rows, cols);
    for j in 0..cols.min(rows) {
        q.set(j, j, 1.0);
    }
    for j in (0..rank).rev() {
        let (v, beta) = &reflectors[j];
        for c in 0..cols {
            let mut proj = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                proj += vi * q.get(j + offset, c);
            }
            let scale = beta * proj;
            for (offset, vi) in v.iter().enumerate() {
                let val = q.get(j + offset, c) - scale * vi;
                q.set(j + offset, c, val);
            }
        }
    }
    // Fix the sign convention: flip columns whose implied R diagonal is
    // negative so the diagonal becomes nonnegative.
    for j in 0..rank {
        if diag_negative[j] {
            for i in 0..rows {
                let val = -q.get(i, j);
                q.set(i, j, val);
            }
        }
    }
    Ok((q, rank, first_deficient))
}

/// Singular values of `m`, nonnegative and sorted descending.
///
/// Computed as square roots of the eigenvalues of the smaller Gram matrix
/// (Jacobi eigensolve), which is accurate to about 1e-8 relative for
/// well-conditioned inputs of moderate size.
pub fn singular_values(m: &DenseMatrix) -> Vector {
    let g = if m.rows() >= m.cols() {
        m.tr_mul(m).expect("gram dims")
    } else {
        m.mul_tr(m).expect("gram dims")
    };
    let mut eigs = jacobi_eigenvalues(g);
    for e in eigs.iter_mut() {
        *e = e.max(0.0).sqrt();
    }
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Vector { data: eigs }
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
fn jacobi_eigenvalues(g: DenseMatrix) -> Vec<f64> {
    jacobi_rotate(g, None)
}

/// Full eigen-decomposition of a small symmetric matrix via cyclic Jacobi
/// rotations: returns eigenvalues sorted descending and the matching
/// eigenvectors as columns, so G = E·diag(λ)·Eᵀ.
pub fn sym_eigen(g: &DenseMatrix) -> Result<(Vector, DenseMatrix)> {
    if g.rows() != g.cols() {
        return Err(Error::InvalidDim(format!(
            "sym_eigen needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let n = g.rows();
    let mut vectors = DenseMatrix::identity(n);
    let values = jacobi_rotate(g.clone(), Some(&mut vectors));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite eigenvalues"));
    let sorted_values = Vector::from_vec(order.iter().map(|&i| values[i]).collect())?;
    let sorted_vectors = DenseMatrix::from_fn(n, n, |i, j| vectors.get(i, order[j]));
    Ok((sorted_values, sorted_vectors))
}

/// Jacobi rotation engine shared by [`jacobi_eigenvalues`] and
/// [`sym_eigen`]: diagonalizes `g` in place, optionally accumulating the
/// rotations into `vectors` (which must start as the identity), and
/// returns the diagonal.
fn jacobi_rotate(mut g: DenseMatrix, mut vectors: Option<&mut DenseMatrix>) -> Vec<f64> {
    let n = g.rows();
    debug_assert_eq!(n, g.cols());
    if n == 1 {
        return vec![g.get(0, 0)];
    }
    let frob = g.frob_norm();
    let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += g.get(p, q).powi(2);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gpq = g.get(p, q);
                if gpq.abs() <= tol / (n as f64) {
                    continue;
                }
                let gpp = g.get(p, p);
                let gqq = g.get(q, q);
                let tau = (gqq - gpp) / (2.0 * gpq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let gkp = g.get(k, p);
                    let gkq = g.get(k, q);
                    g.set(k, p, c * gkp - s * gkq);
                    g.set(k, q, s * gkp + c * gkq);
                }
                for k in 0..n {
                    let gpk = g.get(p, k);
                    let gqk = g.get(q, k);
                    g.set(p, k, c * gpk - s * gqk);
                    g.set(q, k, s * gpk + c * gqk);
                }
                if let Some(e) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let ekp = e.get(k, p);
                        let ekq = e.get(k, q);
                        e.set(k, p, c * ekp - s * ekq);
                        e.set(k, q, s * ekp + c * ekq);
                    }
                }
            }
        }
    }
    (0..n).map(|i| g.get(i, i)).collect()
}

/// Gram matrix `MᵀM`, exactly symmetric by construction.
pub fn gram(m: &DenseMatrix) -> DenseMatrix {
    let p = m.cols();
    let mut g = DenseMatrix::zeros(p, p);
    for i in 0..m.rows() {
        let row = m.row(i);
        for a in 0..p {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..p {
                let val = g.get(a, b) + ra * row[b];
                g.set(a, b, val);
            }
        }
    }
    for a in 0..p {
        for b in (a + 1)..p {
            let v = g.get(a, b);
            g.set(b, a, v);
        }
    }
    g
}

/// Trace of the product of two square matrices, `Tr(Gu · Gv)`.
///
/// With `Gu = UᵀU` and `Gv = VᵀV` this equals ‖UVᵀ‖_F² without forming the
/// m×n product.
pub fn frob_product_factored(gu: &DenseMatrix, gv: &DenseMatrix) -> Result<f64> {
    if gu.rows() != gu.cols() || gv.rows() != gv.cols() || gu.rows() != gv.rows() {
        return Err(Error::DimMismatch {
            context: "frob_product_factored",
            details: format!(
                "need equal square matrices, got {}x{} and {}x{}",
                gu.rows(),
                gu.cols(),
                gv.rows(),
                gv.cols()
            ),
        });
    }
    let p = gu.rows();
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..p {
            acc += gu.get(i, j) * gv.get(j, i);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededStream;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = SeededStream::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| s.next_standard_normal())
    }

    #[test]
    fn from_vec_validates() {
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(DenseMatrix::from_vec(0, 2, vec![]).is_err());
        assert!(matches!(
            DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFiniteData { row: 0, col: 1 })
        ));
    }

    #[test]
    fn qr_identity_is_identity() {
        let q = qr_thin(&DenseMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((q.get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn qr_single_column_sign_convention() {
        let m = DenseMatrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap();
        let q = qr_thin(&m).unwrap();
        assert!((q.get(0, 0) - 0.6).abs() < 1e-14);
        assert!((q.get(1, 0) - 0.8).abs() < 1e-14);
    }

    #[test]
    fn sym_eigen_reconstructs_and_orders() {
        let m = random_matrix(7, 5, 51);
        let g = m.tr_mul(&m).unwrap();
        let (values, vectors) = sym_eigen(&g).unwrap();
        for j in 1..5 {
            assert!(values.get(j - 1) >= values.get(j), "eigenvalues not sorted");
        }
        let vtv = vectors.tr_mul(&vectors).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - expected).abs() < 1e-10);
            }
        }
        // G·E = E·diag(λ).
        let ge = g.mul(&vectors).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expected = vectors.get(i, j) * values.get(j);
                assert!(
                    (ge.get(i, j) - expected).abs() < 1e-8 * values.get(0).max(1.0),
                    "eigenpair {j} violated at row {i}"
                );
            }
        }
    }

    #[test]
    fn least_squares_recovers_square_solution() {
        let a = random_matrix(5, 5, 11);
        let z_true = random_matrix(5, 3, 12);
        let b = a.mul(&z_true).unwrap();
        let z = solve_least_squares(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert!((z.get(i, j) - z_true.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal_to_range() {
        let a = random_matrix(8, 3, 21);
        let b = random_matrix(8, 2, 22);
        let z = solve_least_squares(&a, &b).unwrap();
        let az = a.mul(&z).unwrap();
        let mut resid = b.clone();
        for i in 0..8 {
            for j in 0..2 {
                resid.set(i, j, resid.get(i, j) - az.get(i, j));
            }
        }
        let at_resid = a.tr_mul(&resid).unwrap();
        assert!(at_resid.max_abs() < 1e-10, "normal equations not satisfied");
    }

    #[test]
    fn least_squares_rejects_rank_deficiency_and_dim_mismatch() {
        let mut a = random_matrix(6, 3, 31);
        for i in 0..6 {
            let v = a.get(i, 0) + a.get(i, 1);
            a.set(i, 2, v);
        }
        let b = random_matrix(6, 1, 32);
        assert!(matches!(
            solve_least_squares(&a, &b),
            Err(Error::RankDeficient { .. })
        ));
        let b_bad = random_matrix(5, 1, 33);
        assert!(matches!(
            solve_least_squares(&random_matrix(6, 3, 34), &b_bad),
            Err(Error::InvalidDim(_))
        ));
    }

    #[test]
    fn qr_properties_random() {
        let m = random_matrix(6, 3, 7);
        let q = qr_thin(&m).unwrap();
        let qtq = q.tr_mul(&q).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((qtq.get(i, j) - expected).abs() < 1e-10, "QᵀQ not identity");
            }
        }
        // Q spans col(M): QQᵀM = M.
        let qtm = q.tr_mul(&m).unwrap();
        let recon = q.mul(&qtm).unwrap();
        let mut diff = 0.0;
        for i in 0..6 {
            for j in 0..3 {
                diff += (recon.get(i, j) - m.get(i, j)).powi(2);
            }
        }
        assert!(diff.sqrt() < 1e-10 * m.frob_norm().max(1.0));
    }

    #[test]
    fn qr_rank_deficient_reports_column() {
        // Third column is the sum of the first two.
        let mut m = random_matrix(5, 3, 11);
        for i in 0..5 {
            let v = m.get(i, 0) + m.get(i, 1);
            m.set(i, 2, v);
        }
        match qr_thin(&m) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, 2),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
        let (q, rank) = qr_thin_truncating(&m).unwrap();
        assert_eq!(rank, 2);
        assert_eq!(q.cols(), 2);
        let qtq = q.tr_mul(&q).unwrap();
        assert!((qtq.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((qtq.get(1, 1) - 1.0).abs() < 1e-12);
        assert!(qtq.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn qr_rejects_wide_matrices() {
        let m = random_matrix(2, 4, 1);
        assert!(matches!(qr_thin(&m), Err(Error::InvalidDim(_))));
    }

    #[test]
    fn singular_values_diagonal() {
        let m = DenseMatrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let sv = singular_values(&m);
        assert!((sv.get(0) - 3.0).abs() < 1e-12);
        assert!((sv.get(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_orthonormal_are_one() {
        let q = qr_thin(&random_matrix(8, 4, 3)).unwrap();
        let sv = singular_values(&q);
        assert_eq!(sv.len(), 4);
        for i in 0..4 {
            assert!((sv.get(i) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_values_match_frobenius_identity() {
        let m = random_matrix(5, 3, 17);
        let sv = singular_values(&m);
        let sum_sq: f64 = sv.as_slice().iter().map(|s| s * s).sum();
        assert!((sum_sq - m.frob_norm_sq()).abs() < 1e-9 * m.frob_norm_sq());
    }

    #[test]
    fn gram_matches_definition() {
        let m = DenseMatrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap();
        let g = gram(&m);
        assert_eq!(g.rows(), 1);
        assert!((g.get(0, 0) - 2.0).abs() < 1e-15);

        let g2 = gram(&DenseMatrix::identity(2));
        assert_eq!(g2, DenseMatrix::identity(2));
    }

    #[test]
    fn frob_product_matches_dense_reconstruction() {
        let u = random_matrix(4, 2, 5);
        let v = random_matrix(5, 2, 6);
        let uvt = u.mul_tr(&v).unwrap();
        let factored = frob_product_factored(&gram(&u), &gram(&v)).unwrap();
        let dense = uvt.frob_norm_sq();
        assert!((factored - dense).abs() <= 1e-10 * dense.max(1.0));
    }

    #[test]
    fn frob_product_trivial_cases() {
        let one = DenseMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        assert_eq!(frob_product_factored(&one, &one).unwrap(), 1.0);
        let i2 = DenseMatrix::identity(2);
        assert_eq!(frob_product_factored(&i2, &i2).unwrap(), 2.0);
    }

    #[test]
    fn matmul_agrees_with_triple_loop() {
        let a = random_matrix(4, 3, 21);
        let b = random_matrix(3, 5, 22);
        let c = a.mul(&b).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - acc).abs() < 1e-12);
            }
        }
        let at_b = a.tr_mul(&a).unwrap();
        let at_b_ref = a.transpose().mul(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((at_b.get(i, j) - at_b_ref.get(i, j)).abs() < 1e-12);
            }
        }
        let abt = b.mul_tr(&b).unwrap();
        let abt_ref = b.mul(&b.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((abt.get(i, j) - abt_ref.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sums_match_definitions() {
        let m = DenseMatrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let col = m.ones_t_mul();
        assert_eq!(col.as_slice(), &[5.0, 7.0, 9.0]);
        let row = m.mul_ones();
        assert_eq!(row.as_slice(), &[6.0, 15.0]);
    }
}
