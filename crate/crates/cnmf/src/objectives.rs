//! Compressed objective values evaluated from compressed records only,
//! plus the full-data objective for evaluation.
//!
//! All evaluations use Gram/trace identities (‖UVᵀ‖² = Tr[(UᵀU)(VᵀV)] and
//! friends) so no intermediate ever exceeds max(m, n) × max(r, k) entries.
//! Values are reported without a ½ prefactor; each named term is clamped at
//! zero to absorb cancellation noise, since every term is a squared norm.

use crate::error::{Error, Result};
use crate::linalg::{dot, frob_product_factored, gram, DenseMatrix, Vector};
use crate::sketching::{CompressedOneSided, CompressedTwoSided};

/// Tolerance for the orthonormal-rows requirement of the orthogonal
/// objective.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// The nonnegative factors being learned: U is m×r, V is n×r.
///
/// Nonnegativity is a hard invariant: construction rejects negative
/// entries, and every producing operation in the crate re-establishes it.
#[derive(Debug, Clone)]
pub struct FactorPair {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl FactorPair {
    /// Builds a factor pair, rejecting negative entries and mismatched
    /// inner dimensions.
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::DimMismatch {
                context: "FactorPair::new",
                details: format!("U has rank {}, V has rank {}", u.cols(), v.cols()),
            });
        }
        for (label, m) in [("U", &u), ("V", &v)] {
            if let Some((row, col, value)) = m.first_negative() {
                return Err(Error::Config(format!(
                    "factor {label} has negative entry {value} at ({row}, {col})"
                )));
            }
        }
        Ok(FactorPair { u, v })
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    /// Number of rows of U (the data row count m).
    pub fn m(&self) -> usize {
        self.u.rows()
    }

    /// Number of rows of V (the data column count n).
    pub fn n(&self) -> usize {
        self.v.rows()
    }

    /// Factorization rank r.
    pub fn r(&self) -> usize {
        self.u.cols()
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.u, self.v)
    }

    /// Mutable access to both factors at once, for in-place updates. The
    /// caller must re-establish nonnegativity before the borrows end;
    /// every solver sweep in this crate clamps at zero.
    pub(crate) fn parts_mut(&mut self) -> (&mut DenseMatrix, &mut DenseMatrix) {
        (&mut self.u, &mut self.v)
    }
}

/// Regularization and shift weights for the compressed objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizationParams {
    /// One-sided objectives: a single λ and shift σ.
    OneSided { lambda: f64, sigma: f64 },
    /// Two-sided objective: per-side λ and σ.
    TwoSided {
        lambda1: f64,
        lambda2: f64,
        sigma1: f64,
        sigma2: f64,
    },
}

impl RegularizationParams {
    /// Rejects negative weights.
    pub fn validate(&self) -> Result<()> {
        let all = match *self {
            RegularizationParams::OneSided { lambda, sigma } => vec![lambda, sigma],
            RegularizationParams::TwoSided {
                lambda1,
                lambda2,
                sigma1,
                sigma2,
            } => vec![lambda1, lambda2, sigma1, sigma2],
        };
        for v in all {
            if !(v >= 0.0) {
                return Err(Error::Config(format!(
                    "regularization weights must be >= 0 and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn check_one_sided_dims(c: &CompressedOneSided, f: &FactorPair, context: &'static str) -> Result<()> {
    if f.m() != c.m || f.n() != c.n {
        return Err(Error::DimMismatch {
            context,
            details: format!(
                "record is {}x{} (k={}), factors are {}x{} and {}x{}",
                c.m,
                c.n,
                c.k,
                f.m(),
                f.r(),
                f.n(),
                f.r()
            ),
        });
    }
    Ok(())
}

/// s-weighted row combination: Σ_j s[j] · M_j as a length-cols vector.
fn weighted_row_sum(s: &Vector, m: &DenseMatrix) -> Vec<f64> {
    crate::linalg::weighted_row_sum(s.as_slice(), m)
}

/// ‖s − tᵀ·Mᵀ‖² evaluated as ‖s‖² − 2⟨sᵀM, t⟩ + t·(MᵀM)·tᵀ, i.e. the
/// squared distance between a sum vector and its factored reconstruction.
fn shift_term(s: &Vector, t: &[f64], m_gram: &DenseMatrix, s_m: &[f64]) -> f64 {
    let mut quad = 0.0;
    for a in 0..t.len() {
        quad += t[a] * dot(m_gram.row(a), t);
    }
    (s.norm_sq() - 2.0 * dot(s_m, t) + quad).max(0.0)
}

fn entrywise_product_sum(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    debug_assert_eq!(a.rows(), b.rows());
    debug_assert_eq!(a.cols(), b.cols());
    dot(a.data(), b.data())
}

/// Term breakdown of a one-sided objective value.
#[derive(Debug, Clone, Copy)]
pub struct OneSidedTerms {
    /// ‖Y − (AU)Vᵀ‖².
    pub data: f64,
    /// λ-weighted regularizer (projector complement or ridge).
    pub regularizer: f64,
    /// σ-weighted sum-vector penalty.
    pub shift: f64,
}

impl OneSidedTerms {
    pub fn total(&self) -> f64 {
        self.data + self.regularizer + self.shift
    }
}

/// Term breakdown of the two-sided objective value.
#[derive(Debug, Clone, Copy)]
pub struct TwoSidedTerms {
    pub data_left: f64,
    pub data_right: f64,
    pub regularizer_left: f64,
    pub regularizer_right: f64,
    pub shift_left: f64,
    pub shift_right: f64,
}

impl TwoSidedTerms {
    pub fn total(&self) -> f64 {
        self.data_left
            + self.data_right
            + self.regularizer_left
            + self.regularizer_right
            + self.shift_left
            + self.shift_right
    }
}

fn one_sided_core(
    c: &CompressedOneSided,
    f: &FactorPair,
    lambda: f64,
    sigma: f64,
    orthogonal_complement: bool,
) -> Result<OneSidedTerms> {
    if lambda < 0.0 {
        return Err(Error::LambdaOutOfRange {
            lambda,
            allowed: "[0, inf)",
        });
    }
    if sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    let (u, v) = (f.u(), f.v());
    let au = c.a.matrix.mul(u)?; // k×r
    let yv = c.y.mul(v)?; // k×r
    let g_v = gram(v);
    let g_au = gram(&au);
    let y_sq = c.y.frob_norm_sq();

    let data = (y_sq - 2.0 * entrywise_product_sum(&yv, &au)
        + frob_product_factored(&g_au, &g_v)?)
    .max(0.0);

    let regularizer = if lambda == 0.0 {
        0.0
    } else {
        let g_u = gram(u);
        let full = frob_product_factored(&g_u, &g_v)?;
        let value = if orthogonal_complement {
            full - frob_product_factored(&g_au, &g_v)?
        } else {
            full
        };
        lambda * value.max(0.0)
    };

    let shift = if sigma == 0.0 {
        0.0
    } else {
        let t = u.ones_t_mul();
        let s_v = weighted_row_sum(&c.row_sums, v);
        sigma * shift_term(&c.row_sums, t.as_slice(), &g_v, &s_v)
    };

    Ok(OneSidedTerms {
        data,
        regularizer,
        shift,
    })
}

/// One-sided objective for a sketch with orthonormal rows:
/// ‖Y − (AU)Vᵀ‖² + λ·(Tr[(UᵀU)(VᵀV)] − Tr[((AU)ᵀAU)(VᵀV)]) + σ‖1ᵀX − (1ᵀU)Vᵀ‖².
///
/// The λ term equals λ‖(I − AᵀA)UVᵀ‖² exactly when A has orthonormal rows,
/// which is verified (within [`ORTHONORMAL_TOL`]) before evaluating.
pub fn obj_one_sided_orthogonal(
    c: &CompressedOneSided,
    f: &FactorPair,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    Ok(obj_one_sided_orthogonal_terms(c, f, lambda, sigma)?.total())
}

/// Term breakdown of [`obj_one_sided_orthogonal`].
pub fn obj_one_sided_orthogonal_terms(
    c: &CompressedOneSided,
    f: &FactorPair,
    lambda: f64,
    sigma: f64,
) -> Result<OneSidedTerms> {
    check_one_sided_dims(c, f, "obj_one_sided_orthogonal")?;
    c.a.verify_orthonormal(ORTHONORMAL_TOL)?;
    one_sided_core(c, f, lambda, sigma, true)
}

/// One-sided ridge objective for a general (not necessarily orthonormal)
/// sketch: ‖Y − (AU)Vᵀ‖² + λ·Tr[(UᵀU)(VᵀV)] + σ‖1ᵀX − (1ᵀU)Vᵀ‖².
pub fn obj_one_sided_ridge(
    c: &CompressedOneSided,
    f: &FactorPair,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    Ok(obj_one_sided_ridge_terms(c, f, lambda, sigma)?.total())
}

/// Term breakdown of [`obj_one_sided_ridge`].
pub fn obj_one_sided_ridge_terms(
    c: &CompressedOneSided,
    f: &FactorPair,
    lambda: f64,
    sigma: f64,
) -> Result<OneSidedTerms> {
    check_one_sided_dims(c, f, "obj_one_sided_ridge")?;
    one_sided_core(c, f, lambda, sigma, false)
}

/// Two-sided objective: both sketched residuals, per-side projector
/// complements weighted by λ1/λ2, and per-side sum penalties weighted by
/// σ1/σ2, all through Gram identities.
pub fn obj_two_sided(
    c: &CompressedTwoSided,
    f: &FactorPair,
    params: &RegularizationParams,
) -> Result<f64> {
    Ok(obj_two_sided_terms(c, f, params)?.total())
}

/// Term breakdown of [`obj_two_sided`].
pub fn obj_two_sided_terms(
    c: &CompressedTwoSided,
    f: &FactorPair,
    params: &RegularizationParams,
) -> Result<TwoSidedTerms> {
    params.validate()?;
    let (lambda1, lambda2, sigma1, sigma2) = match *params {
        RegularizationParams::TwoSided {
            lambda1,
            lambda2,
            sigma1,
            sigma2,
        } => (lambda1, lambda2, sigma1, sigma2),
        RegularizationParams::OneSided { .. } => {
            return Err(Error::Config(
                "two-sided objective needs RegularizationParams::TwoSided".into(),
            ))
        }
    };
    if f.m() != c.m() || f.n() != c.n() {
        return Err(Error::DimMismatch {
            context: "obj_two_sided",
            details: format!(
                "record is {}x{}, factors are {}x{} and {}x{}",
                c.m(),
                c.n(),
                f.m(),
                f.r(),
                f.n(),
                f.r()
            ),
        });
    }
    let (u, v) = (f.u(), f.v());
    let g_u = gram(u);
    let g_v = gram(v);

    // Left residual ‖Y1 − (A1U)Vᵀ‖².
    let a1u = c.a1.matrix.mul(u)?;
    let y1v = c.y1.mul(v)?;
    let data_left = (c.y1.frob_norm_sq() - 2.0 * entrywise_product_sum(&y1v, &a1u)
        + frob_product_factored(&gram(&a1u), &g_v)?)
    .max(0.0);

    // Right residual ‖Y2 − U(A2ᵀV)ᵀ‖².
    let w = c.a2.matrix.tr_mul(v)?; // k2×r
    let y2u = c.y2.tr_mul(u)?; // k2×r
    let data_right = (c.y2.frob_norm_sq() - 2.0 * entrywise_product_sum(&y2u, &w)
        + frob_product_factored(&g_u, &gram(&w))?)
    .max(0.0);

    let full = frob_product_factored(&g_u, &g_v)?;
    let regularizer_left = if lambda1 == 0.0 {
        0.0
    } else {
        let q1u = c.q1.tr_mul(u)?;
        lambda1 * (full - frob_product_factored(&gram(&q1u), &g_v)?).max(0.0)
    };
    let regularizer_right = if lambda2 == 0.0 {
        0.0
    } else {
        let q2v = c.q2.tr_mul(v)?;
        lambda2 * (full - frob_product_factored(&g_u, &gram(&q2v))?).max(0.0)
    };

    let shift_left = if sigma1 == 0.0 {
        0.0
    } else {
        let t = u.ones_t_mul();
        let s_v = weighted_row_sum(&c.row_sums, v);
        sigma1 * shift_term(&c.row_sums, t.as_slice(), &g_v, &s_v)
    };
    let shift_right = if sigma2 == 0.0 {
        0.0
    } else {
        let vt = v.ones_t_mul();
        let s_u = weighted_row_sum(&c.col_sums, u);
        sigma2 * shift_term(&c.col_sums, vt.as_slice(), &g_u, &s_u)
    };

    Ok(TwoSidedTerms {
        data_left,
        data_right,
        regularizer_left,
        regularizer_right,
        shift_left,
        shift_right,
    })
}

/// Full (uncompressed) objective ‖X − UVᵀ‖², evaluated without forming the
/// m×n reconstruction: ‖X‖² − 2·Tr[Vᵀ(XᵀU)] + Tr[(UᵀU)(VᵀV)].
pub fn obj_full(x: &DenseMatrix, f: &FactorPair) -> Result<f64> {
    if x.rows() != f.m() || x.cols() != f.n() {
        return Err(Error::DimMismatch {
            context: "obj_full",
            details: format!(
                "data is {}x{}, factors are {}x{} and {}x{}",
                x.rows(),
                x.cols(),
                f.m(),
                f.r(),
                f.n(),
                f.r()
            ),
        });
    }
    let xtu = x.tr_mul(f.u())?; // n×r
    let cross = entrywise_product_sum(&xtu, f.v());
    let quad = frob_product_factored(&gram(f.u()), &gram(f.v()))?;
    Ok((x.frob_norm_sq() - 2.0 * cross + quad).max(0.0))
}
