//! Multiplicative updates and projected gradient descent over factored
//! Gram terms.
//!
//! A [`SketchedMUProblem`] is a sum of [`GramTerm`]s, each a factored
//! representation of one summand of a compressed objective. Updates are
//! assembled row by row from small precomputed products (k×r and r×r), so
//! no intermediate ever exceeds max(m, n) × max(r, k) entries and the full
//! data matrix is never touched.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, frob_product_factored, gram, solve_least_squares, vec_mat_into, weighted_row_sum,
    DenseMatrix, Vector,
};
use crate::objectives::{FactorPair, ORTHONORMAL_TOL};
use crate::rng::SeededStream;
use crate::sketching::{
    shift_sigma, shift_sigma_regularized, CompressedOneSided, CompressedTwoSided, Side,
};

/// One factored summand of a compressed objective.
///
/// A term lives on a side: left terms act on row space (sketches of the
/// form A·M), right terms on column space (M·B). Every term contributes to
/// the updates of both factors.
#[derive(Debug, Clone)]
pub struct GramTerm {
    side: Side,
    form: GramForm,
}

#[derive(Debug, Clone)]
enum GramForm {
    /// ‖A(X − UVᵀ)‖²-style term with an explicit sketched target. The
    /// `gram_weight` scales only the quadratic (Gram) part of the term;
    /// the cross/target part always has weight 1. Operators are stored
    /// with their data dimension on rows: `op` is Aᵀ (m×k) for left terms
    /// and B (n×k) for right terms; `target` is Yᵀ (n×k) for left terms
    /// and X·B (m×k) for right terms, so all row accesses are contiguous.
    ExplicitSketch {
        gram_weight: f64,
        op: DenseMatrix,
        target: DenseMatrix,
        target_frob_sq: f64,
    },
    /// σ‖1ᵀ(X − UVᵀ)‖² (left) or σ‖(X − UVᵀ)1‖² (right); `s` is the
    /// matching sum vector of X (length n for left, m for right).
    RankOneShift { sigma: f64, s: Vector },
    /// λ‖(I − QQᵀ)UVᵀ‖² (left) or λ‖UVᵀ(I − QQᵀ)‖² (right); Q has
    /// orthonormal columns. Target contribution is zero.
    ProjectorComplement { lambda: f64, q: DenseMatrix },
    /// λ‖UVᵀ‖². Target contribution is zero.
    ScaledIdentity { lambda: f64 },
}

impl GramTerm {
    /// Sketch term from an operator and its sketched target in their
    /// natural orientations: for [`Side::Left`], `a` is k×m and `y` = A·X
    /// is k×n; for [`Side::Right`], `a` is the n×k right operator B and
    /// `y` = X·B is m×k. `gram_weight` scales the quadratic part only
    /// (weight 1 terms are plain ‖Y − sketch(UVᵀ)‖² summands).
    pub fn explicit_sketch(
        a: &DenseMatrix,
        y: &DenseMatrix,
        side: Side,
        gram_weight: f64,
    ) -> Result<GramTerm> {
        if !gram_weight.is_finite() || gram_weight < 0.0 {
            return Err(Error::Config(format!(
                "sketch gram weight must be finite and >= 0, got {gram_weight}"
            )));
        }
        let (op, target) = match side {
            Side::Left => {
                if a.rows() != y.rows() {
                    return Err(Error::DimMismatch {
                        context: "GramTerm::explicit_sketch",
                        details: format!(
                            "left operator is {}x{} but target has {} rows",
                            a.rows(),
                            a.cols(),
                            y.rows()
                        ),
                    });
                }
                (a.transpose(), y.transpose())
            }
            Side::Right => {
                if a.cols() != y.cols() {
                    return Err(Error::DimMismatch {
                        context: "GramTerm::explicit_sketch",
                        details: format!(
                            "right operator is {}x{} but target has {} columns",
                            a.rows(),
                            a.cols(),
                            y.cols()
                        ),
                    });
                }
                (a.clone(), y.clone())
            }
        };
        let target_frob_sq = target.frob_norm_sq();
        Ok(GramTerm {
            side,
            form: GramForm::ExplicitSketch {
                gram_weight,
                op,
                target,
                target_frob_sq,
            },
        })
    }

    /// Rank-one shift term σ‖sum(X) − sum(UVᵀ)‖² with the matching sum
    /// vector of X (`1ᵀX` for left terms, `X·1` for right terms).
    pub fn rank_one_shift(sigma: f64, s: &Vector, side: Side) -> Result<GramTerm> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Config(format!(
                "shift sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(GramTerm {
            side,
            form: GramForm::RankOneShift {
                sigma,
                s: s.clone(),
            },
        })
    }

    /// Projector-complement term λ‖(I − QQᵀ)·UVᵀ‖² (left) or the mirrored
    /// right version; `q` must have orthonormal columns.
    pub fn projector_complement(lambda: f64, q: &DenseMatrix, side: Side) -> Result<GramTerm> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::LambdaOutOfRange {
                lambda,
                allowed: "[0, inf)",
            });
        }
        let g = gram(q);
        let mut defect = 0.0_f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g.get(i, j) - target).abs());
            }
        }
        if defect > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(format!(
                "projector basis has orthonormality defect {defect:.3e}"
            )));
        }
        Ok(GramTerm {
            side,
            form: GramForm::ProjectorComplement {
                lambda,
                q: q.clone(),
            },
        })
    }

    /// Ridge term λ‖UVᵀ‖².
    pub fn scaled_identity(lambda: f64, side: Side) -> Result<GramTerm> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::LambdaOutOfRange {
                lambda,
                allowed: "[0, inf)",
            });
        }
        Ok(GramTerm {
            side,
            form: GramForm::ScaledIdentity { lambda },
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Short name of the term family, used for trace column headers.
    pub fn form_name(&self) -> &'static str {
        match self.form {
            GramForm::ExplicitSketch { .. } => "sketch",
            GramForm::RankOneShift { .. } => "shift",
            GramForm::ProjectorComplement { .. } => "projector",
            GramForm::ScaledIdentity { .. } => "identity",
        }
    }

    fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        let (gram_dim, target_dim) = match self.side {
            Side::Left => (m, n),
            Side::Right => (n, m),
        };
        let ok = match &self.form {
            GramForm::ExplicitSketch { op, target, .. } => {
                op.rows() == gram_dim && target.rows() == target_dim && op.cols() == target.cols()
            }
            GramForm::RankOneShift { s, .. } => s.len() == target_dim,
            GramForm::ProjectorComplement { q, .. } => q.rows() == gram_dim,
            GramForm::ScaledIdentity { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimMismatch {
                context: "SketchedMUProblem",
                details: format!(
                    "{} term on side {:?} is inconsistent with m={m}, n={n}",
                    self.form_name(),
                    self.side
                ),
            })
        }
    }
}

/// Nonnegativity certificates for the multiplicative-update engine: the
/// summed Gram matrices and summed target matrices must be entrywise
/// nonnegative for the objective to be provably nonincreasing. The
/// problem builders certify this through the σ shift machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemValidity {
    pub sum_gram_nonneg_certified: bool,
    pub sum_target_nonneg_certified: bool,
}

impl ProblemValidity {
    pub fn certified() -> Self {
        ProblemValidity {
            sum_gram_nonneg_certified: true,
            sum_target_nonneg_certified: true,
        }
    }

    pub fn uncertified() -> Self {
        ProblemValidity {
            sum_gram_nonneg_certified: false,
            sum_target_nonneg_certified: false,
        }
    }
}

/// A compressed factorization problem: dimensions, a list of factored
/// Gram terms, and the nonnegativity certificates. Immutable once built,
/// so sweeps over seeds or weights can share one problem across threads.
#[derive(Debug, Clone)]
pub struct SketchedMUProblem {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    terms: Vec<GramTerm>,
    pub validity: ProblemValidity,
}

impl SketchedMUProblem {
    /// Assembles a problem from terms, checking every term against the
    /// declared dimensions. The caller vouches for `validity`; the
    /// builders in this module certify it via σ shift thresholds.
    pub fn new(
        m: usize,
        n: usize,
        r: usize,
        terms: Vec<GramTerm>,
        validity: ProblemValidity,
    ) -> Result<Self> {
        if m == 0 || n == 0 || r == 0 {
            return Err(Error::InvalidDim(format!(
                "problem dimensions must be positive, got m={m}, n={n}, r={r}"
            )));
        }
        if terms.is_empty() {
            return Err(Error::Config(
                "a sketched problem needs at least one Gram term".into(),
            ));
        }
        for t in &terms {
            t.check_dims(m, n)?;
        }
        Ok(SketchedMUProblem {
            m,
            n,
            r,
            terms,
            validity,
        })
    }

    pub fn terms(&self) -> &[GramTerm] {
        &self.terms
    }

    pub fn is_certified(&self) -> bool {
        self.validity.sum_gram_nonneg_certified && self.validity.sum_target_nonneg_certified
    }

    /// Stable names for the per-term objective values, e.g. `sketch_left`;
    /// repeated families get an ordinal suffix.
    pub fn term_names(&self) -> Vec<String> {
        let bases: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                format!(
                    "{}_{}",
                    t.form_name(),
                    match t.side() {
                        Side::Left => "left",
                        Side::Right => "right",
                    }
                )
            })
            .collect();
        let mut names = Vec::with_capacity(bases.len());
        for (i, base) in bases.iter().enumerate() {
            let total = bases.iter().filter(|b| *b == base).count();
            if total == 1 {
                names.push(base.clone());
            } else {
                let ordinal = bases[..=i].iter().filter(|b| *b == base).count();
                names.push(format!("{base}_{ordinal}"));
            }
        }
        names
    }

    fn check_factors(&self, f: &FactorPair) -> Result<()> {
        if f.m() != self.m || f.n() != self.n || f.r() != self.r {
            return Err(Error::DimMismatch {
                context: "SketchedMUProblem",
                details: format!(
                    "problem is {}x{} rank {}, factors are {}x{} and {}x{}",
                    self.m,
                    self.n,
                    self.r,
                    f.m(),
                    f.r(),
                    f.n(),
                    f.r()
                ),
            });
        }
        Ok(())
    }

    /// Objective value: the sum of the per-term values from
    /// [`objective_terms`](Self::objective_terms).
    pub fn objective(&self, f: &FactorPair) -> Result<f64> {
        Ok(self.objective_terms(f)?.iter().sum())
    }

    /// Per-term objective values, in term order. Shift, projector, and
    /// identity terms are squared norms and are clamped at zero against
    /// rounding; a gram-weighted sketch term can be legitimately negative
    /// on its own (only the sum over terms is a squared norm), so sketch
    /// terms are reported unclamped.
    pub fn objective_terms(&self, f: &FactorPair) -> Result<Vec<f64>> {
        self.check_factors(f)?;
        let g_u = gram(f.u());
        let g_v = gram(f.v());
        let full = frob_product_factored(&g_u, &g_v)?;
        let mut out = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            // fg: factor on the term's Gram side; ft: on the target side.
            let (fg, ft, g_t) = match term.side {
                Side::Left => (f.u(), f.v(), &g_v),
                Side::Right => (f.v(), f.u(), &g_u),
            };
            let value = match &term.form {
                GramForm::ExplicitSketch {
                    gram_weight,
                    op,
                    target,
                    target_frob_sq,
                } => {
                    let g = op.tr_mul(fg)?; // k×r, e.g. AU
                    let t = target.tr_mul(ft)?; // k×r, e.g. YV
                    target_frob_sq - 2.0 * dot(g.data(), t.data())
                        + gram_weight * frob_product_factored(&gram(&g), g_t)?
                }
                GramForm::RankOneShift { sigma, s } => {
                    if *sigma == 0.0 {
                        0.0
                    } else {
                        let t_g = fg.ones_t_mul();
                        let sw = weighted_row_sum(s.as_slice(), ft);
                        let mut quad = 0.0;
                        for a in 0..t_g.len() {
                            quad += t_g.get(a) * dot(g_t.row(a), t_g.as_slice());
                        }
                        sigma
                            * (s.norm_sq() - 2.0 * dot(&sw, t_g.as_slice()) + quad).max(0.0)
                    }
                }
                GramForm::ProjectorComplement { lambda, q } => {
                    if *lambda == 0.0 {
                        0.0
                    } else {
                        let p = q.tr_mul(fg)?;
                        lambda * (full - frob_product_factored(&gram(&p), g_t)?).max(0.0)
                    }
                }
                GramForm::ScaledIdentity { lambda } => lambda * full,
            };
            out.push(value);
        }
        Ok(out)
    }
}

/// One-sided problem for a sketch with orthonormal rows. The λ-weighted
/// projector regularizer is encoded through the algebraic split
/// (1−λ)AᵀA + λI of the denominator Gram, so terms are: a sketch term
/// with gram weight 1−λ, a scaled identity λ, and the σ shift. Requires
/// λ ∈ [0, 1] and σ within 1e-12 of the certified minimum or above.
pub fn build_problem_one_sided_orthogonal(
    c: &CompressedOneSided,
    r: usize,
    lambda: f64,
    sigma: f64,
) -> Result<SketchedMUProblem> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange {
            lambda,
            allowed: "[0, 1]",
        });
    }
    c.a.verify_orthonormal(ORTHONORMAL_TOL)?;
    check_sigma(sigma, shift_sigma(&c.a).value, "left")?;
    let terms = vec![
        GramTerm::explicit_sketch(&c.a.matrix, &c.y, Side::Left, 1.0 - lambda)?,
        GramTerm::scaled_identity(lambda, Side::Left)?,
        GramTerm::rank_one_shift(sigma, &c.row_sums, Side::Left)?,
    ];
    SketchedMUProblem::new(c.m, c.n, r, terms, ProblemValidity::certified())
}

/// One-sided ridge problem for a general sketch: plain sketch term, the σ
/// shift, and a λ‖UVᵀ‖² ridge. Requires λ ≥ 0 and σ at the certified
/// minimum or above.
pub fn build_problem_one_sided_ridge(
    c: &CompressedOneSided,
    r: usize,
    lambda: f64,
    sigma: f64,
) -> Result<SketchedMUProblem> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::LambdaOutOfRange {
            lambda,
            allowed: "[0, inf)",
        });
    }
    check_sigma(sigma, shift_sigma(&c.a).value, "left")?;
    let terms = vec![
        GramTerm::explicit_sketch(&c.a.matrix, &c.y, Side::Left, 1.0)?,
        GramTerm::rank_one_shift(sigma, &c.row_sums, Side::Left)?,
        GramTerm::scaled_identity(lambda, Side::Left)?,
    ];
    SketchedMUProblem::new(c.m, c.n, r, terms, ProblemValidity::certified())
}

/// Two-sided problem: sketch, shift, and projector-complement terms on
/// each side. σ1/σ2 must reach the regularization-aware certified minima
/// for their respective sides.
pub fn build_problem_two_sided(
    c: &CompressedTwoSided,
    r: usize,
    lambda1: f64,
    lambda2: f64,
    sigma1: f64,
    sigma2: f64,
) -> Result<SketchedMUProblem> {
    for lambda in [lambda1, lambda2] {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::LambdaOutOfRange {
                lambda,
                allowed: "[0, inf)",
            });
        }
    }
    check_sigma(
        sigma1,
        shift_sigma_regularized(&c.a1, lambda1, &c.q1)?.value,
        "left",
    )?;
    check_sigma(
        sigma2,
        shift_sigma_regularized(&c.a2, lambda2, &c.q2)?.value,
        "right",
    )?;
    let terms = vec![
        GramTerm::explicit_sketch(&c.a1.matrix, &c.y1, Side::Left, 1.0)?,
        GramTerm::rank_one_shift(sigma1, &c.row_sums, Side::Left)?,
        GramTerm::projector_complement(lambda1, &c.q1, Side::Left)?,
        GramTerm::explicit_sketch(&c.a2.matrix, &c.y2, Side::Right, 1.0)?,
        GramTerm::rank_one_shift(sigma2, &c.col_sums, Side::Right)?,
        GramTerm::projector_complement(lambda2, &c.q2, Side::Right)?,
    ];
    SketchedMUProblem::new(c.m(), c.n(), r, terms, ProblemValidity::certified())
}

fn check_sigma(given: f64, required: f64, side: &'static str) -> Result<()> {
    if !given.is_finite() || given < 0.0 {
        return Err(Error::Config(format!(
            "sigma must be finite and >= 0, got {given}"
        )));
    }
    if given < required - 1e-12 {
        return Err(Error::InsufficientSigma {
            side,
            given,
            required,
        });
    }
    Ok(())
}

/// Per-row contribution of one term to a factor update. `P` denotes the
/// factor being updated, `O` the other factor; all matrices here are the
/// small precomputed products, frozen before the row sweep.
enum RowContribution<'a> {
    /// Sketch whose Gram side is P: numerator row i += op_i × cross,
    /// denominator row i += op_i × quad (quad already carries the gram
    /// weight).
    SketchGram {
        op: &'a DenseMatrix,
        cross: DenseMatrix,
        quad: DenseMatrix,
    },
    /// Sketch whose Gram side is O: numerator row i += target_i × c; the
    /// quadratic part is folded into the shared row matrix.
    SketchTarget {
        target: &'a DenseMatrix,
        c: DenseMatrix,
    },
    /// Shift whose sum vector indexes P's rows: numerator row i +=
    /// σ·s[i]·t_o, denominator row i += σ·(p_i · t_o)·t_o.
    ShiftRows {
        sigma: f64,
        s: &'a Vector,
        t_o: Vec<f64>,
    },
    /// Projector on P's side: denominator row i −= q_i × pqg (the λ·G_o
    /// part lives in the shared row matrix; pqg carries λ).
    ProjectorRows {
        q: &'a DenseMatrix,
        pqg: DenseMatrix,
    },
}

/// Everything needed to produce numerator and denominator rows for one
/// factor's update: per-term contributions plus the folded r×r matrix and
/// constant rows shared by all rows of the factor.
struct UpdatePlan<'a> {
    contrib: Vec<RowContribution<'a>>,
    row_matrix: DenseMatrix,
    num_const: Vec<f64>,
    den_const: Vec<f64>,
    r: usize,
}

fn scale_in_place(m: &mut DenseMatrix, c: f64) {
    for v in m.data_mut() {
        *v *= c;
    }
}

fn add_scaled_into(dst: &mut DenseMatrix, c: f64, src: &DenseMatrix) {
    axpy(dst.data_mut(), c, src.data());
}

/// Builds the update plan for the factor `p_mat` (values from before the
/// sweep) against the other factor `o_mat`. `updating` says which side
/// `p_mat` lives on: terms on that side have their Gram acting on P.
fn build_update_plan<'a>(
    terms: &'a [GramTerm],
    p_mat: &DenseMatrix,
    o_mat: &DenseMatrix,
    updating: Side,
) -> Result<UpdatePlan<'a>> {
    let r = p_mat.cols();
    let g_o = gram(o_mat);
    let t_p = p_mat.ones_t_mul();
    let t_o = o_mat.ones_t_mul();
    let mut plan = UpdatePlan {
        contrib: Vec::new(),
        row_matrix: DenseMatrix::zeros(r, r),
        num_const: vec![0.0; r],
        den_const: vec![0.0; r],
        r,
    };
    for term in terms {
        let gram_on_p = term.side == updating;
        match &term.form {
            GramForm::ExplicitSketch {
                gram_weight,
                op,
                target,
                ..
            } => {
                if gram_on_p {
                    let cross = target.tr_mul(o_mat)?; // k×r, e.g. YV
                    let g_op = op.tr_mul(p_mat)?; // k×r, e.g. AU
                    let mut quad = g_op.mul(&g_o)?; // k×r
                    scale_in_place(&mut quad, *gram_weight);
                    plan.contrib
                        .push(RowContribution::SketchGram { op, cross, quad });
                } else {
                    let c = op.tr_mul(o_mat)?; // k×r, e.g. BᵀV
                    add_scaled_into(&mut plan.row_matrix, *gram_weight, &gram(&c));
                    plan.contrib
                        .push(RowContribution::SketchTarget { target, c });
                }
            }
            GramForm::RankOneShift { sigma, s } => {
                if *sigma == 0.0 {
                    continue;
                }
                if gram_on_p {
                    // s indexes O's rows; both contributions are the same
                    // for every row of P.
                    let sw = weighted_row_sum(s.as_slice(), o_mat);
                    axpy(&mut plan.num_const, *sigma, &sw);
                    let mut tg = vec![0.0; r];
                    vec_mat_into(t_p.as_slice(), &g_o, &mut tg);
                    axpy(&mut plan.den_const, *sigma, &tg);
                } else {
                    plan.contrib.push(RowContribution::ShiftRows {
                        sigma: *sigma,
                        s,
                        t_o: t_o.as_slice().to_vec(),
                    });
                }
            }
            GramForm::ProjectorComplement { lambda, q } => {
                if *lambda == 0.0 {
                    continue;
                }
                add_scaled_into(&mut plan.row_matrix, *lambda, &g_o);
                if gram_on_p {
                    let pq = q.tr_mul(p_mat)?; // cols(Q)×r
                    let mut pqg = pq.mul(&g_o)?;
                    scale_in_place(&mut pqg, *lambda);
                    plan.contrib.push(RowContribution::ProjectorRows { q, pqg });
                } else {
                    let qo = q.tr_mul(o_mat)?;
                    add_scaled_into(&mut plan.row_matrix, -*lambda, &gram(&qo));
                }
            }
            GramForm::ScaledIdentity { lambda } => {
                add_scaled_into(&mut plan.row_matrix, *lambda, &g_o);
            }
        }
    }
    Ok(plan)
}

impl<'a> UpdatePlan<'a> {
    fn denominator_row(&self, i: usize, p_row: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.den_const);
        vec_mat_into(p_row, &self.row_matrix, out);
        for c in &self.contrib {
            match c {
                RowContribution::SketchGram { op, quad, .. } => {
                    vec_mat_into(op.row(i), quad, out);
                }
                RowContribution::SketchTarget { .. } => {}
                RowContribution::ShiftRows { sigma, t_o, .. } => {
                    axpy(out, *sigma * dot(p_row, t_o), t_o);
                }
                RowContribution::ProjectorRows { q, pqg } => {
                    let qi = q.row(i);
                    for t in 0..q.cols() {
                        axpy(out, -qi[t], pqg.row(t));
                    }
                }
            }
        }
    }

    fn numerator_row(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.num_const);
        for c in &self.contrib {
            match c {
                RowContribution::SketchGram { op, cross, .. } => {
                    vec_mat_into(op.row(i), cross, out);
                }
                RowContribution::SketchTarget { target, c } => {
                    vec_mat_into(target.row(i), c, out);
                }
                RowContribution::ShiftRows { sigma, s, t_o } => {
                    axpy(out, *sigma * s.get(i), t_o);
                }
                RowContribution::ProjectorRows { .. } => {}
            }
        }
    }
}

/// Multiplicative sweep over one factor: p_i ← p_i ∘ N_i / (D_i + guard),
/// in place. Guard semantics: `guard_coeff` is relative, the added value
/// is guard_coeff × mean(D) (falling back to the coefficient itself when
/// the mean is not positive); the mean is found in a first read-only pass
/// so no full-size N/D buffers are ever held.
fn mu_sweep(plan: &UpdatePlan, p_mat: &mut DenseMatrix, guard_coeff: f64) -> Result<()> {
    let r = plan.r;
    let rows = p_mat.rows();
    let mut den = vec![0.0; r];
    let mut num = vec![0.0; r];
    let mut total = 0.0;
    for i in 0..rows {
        plan.denominator_row(i, p_mat.row(i), &mut den);
        for &d in den.iter() {
            total += d;
        }
    }
    let mean = total / (rows * r) as f64;
    let guard = if mean > 0.0 {
        guard_coeff * mean
    } else {
        guard_coeff
    };
    for i in 0..rows {
        plan.denominator_row(i, p_mat.row(i), &mut den);
        plan.numerator_row(i, &mut num);
        let row = p_mat.row_mut(i);
        for t in 0..r {
            let value = row[t] * num[t] / (den[t] + guard);
            if !value.is_finite() {
                return Err(Error::NonFiniteUpdate);
            }
            row[t] = value.max(0.0);
        }
    }
    Ok(())
}

/// Projected-gradient sweep over one factor: p_i ← max(p_i − α(D_i − N_i), 0)
/// where D − N is the gradient of the ½-scaled objective.
fn pgd_sweep(plan: &UpdatePlan, p_mat: &mut DenseMatrix, alpha: f64) -> Result<()> {
    let r = plan.r;
    let mut den = vec![0.0; r];
    let mut num = vec![0.0; r];
    for i in 0..p_mat.rows() {
        plan.denominator_row(i, p_mat.row(i), &mut den);
        plan.numerator_row(i, &mut num);
        let row = p_mat.row_mut(i);
        for t in 0..r {
            let value = row[t] - alpha * (den[t] - num[t]);
            if !value.is_finite() {
                return Err(Error::NonFiniteUpdate);
            }
            row[t] = value.max(0.0);
        }
    }
    Ok(())
}

/// One multiplicative update: U first, then V against the updated U
/// (alternating order; each block step is a descent step, and their
/// composition is the reference semantics here). Requires a certified
/// problem; `guard` is the relative denominator guard coefficient.
pub fn mu_step(p: &SketchedMUProblem, f: &FactorPair, guard: f64) -> Result<FactorPair> {
    let mut out = f.clone();
    mu_step_in_place(p, &mut out, guard)?;
    Ok(out)
}

pub(crate) fn mu_step_in_place(
    p: &SketchedMUProblem,
    f: &mut FactorPair,
    guard: f64,
) -> Result<()> {
    if !p.is_certified() {
        return Err(Error::UncertifiedProblem);
    }
    if !(guard > 0.0) {
        return Err(Error::Config(format!(
            "denominator guard must be > 0, got {guard}"
        )));
    }
    p.check_factors(f)?;
    let (u, v) = f.parts_mut();
    {
        let plan = build_update_plan(p.terms(), u, v, Side::Left)?;
        mu_sweep(&plan, u, guard)?;
    }
    {
        let plan = build_update_plan(p.terms(), v, u, Side::Right)?;
        mu_sweep(&plan, v, guard)?;
    }
    Ok(())
}

/// One projected-gradient step with constant step size α: both factors
/// move simultaneously from the same iterate (non-alternating), then
/// project onto the nonnegative orthant. Works on uncertified problems.
pub fn pgd_step(p: &SketchedMUProblem, f: &FactorPair, alpha: f64) -> Result<FactorPair> {
    let mut out = f.clone();
    pgd_step_in_place(p, &mut out, alpha)?;
    Ok(out)
}

pub(crate) fn pgd_step_in_place(
    p: &SketchedMUProblem,
    f: &mut FactorPair,
    alpha: f64,
) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("step size must be > 0, got {alpha}")));
    }
    p.check_factors(f)?;
    let (u, v) = f.parts_mut();
    // Both plans are frozen from the same (U, V) before either sweep, so
    // the update is exactly simultaneous despite in-place row writes.
    let plan_u = build_update_plan(p.terms(), u, v, Side::Left)?;
    let plan_v = build_update_plan(p.terms(), v, u, Side::Right)?;
    pgd_sweep(&plan_u, u, alpha)?;
    pgd_sweep(&plan_v, v, alpha)?;
    Ok(())
}

/// Strictly positive random initialization: entries i.i.d. Uniform on
/// (scale·0.3, scale], deterministic per seed. Strict positivity keeps
/// multiplicative updates from locking entries at zero spuriously, and
/// the lower bound stays within one multiplicative octave of `scale`:
/// entries seeded decades below scale cost multiplicative updates many
/// iterations of bounded per-step growth just to climb back.
pub fn init_factors(m: usize, n: usize, r: usize, seed: u64, scale: f64) -> Result<FactorPair> {
    if m == 0 || n == 0 || r == 0 {
        return Err(Error::InvalidDim(format!(
            "factor dimensions must be positive, got m={m}, n={n}, r={r}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!(
            "init scale must be finite and > 0, got {scale}"
        )));
    }
    let mut stream = SeededStream::new(seed);
    let lo = scale * 0.3;
    let u = DenseMatrix::from_fn(m, r, |_, _| stream.next_uniform_open_closed(lo, scale));
    let v = DenseMatrix::from_fn(n, r, |_, _| stream.next_uniform_open_closed(lo, scale));
    FactorPair::new(u, v)
}

/// Spectral initialization from a one-sided record.
///
/// Takes the top-r singular triples of the min-norm data reconstruction
/// Aᵀ(AAᵀ)⁻¹Y — computed in factored form, never materializing anything
/// m×n — and converts each triple into a nonnegative rank-one pair by
/// keeping whichever sign pattern (positive or negative parts) carries
/// more mass. Entries the split clips to zero are refilled at a fraction
/// of the factor's mean kept entry (hard zeros would lock multiplicative
/// updates into one basin), a ±5% seeded multiplicative jitter
/// decorrelates repeated runs, and the pair is rescaled so ‖U₀V₀ᵀ‖_F
/// matches the recorded data norm.
///
/// When the sketch rows span the data's column space (a rangefinder sketch
/// of exactly low-rank data) the reconstruction is the data matrix itself,
/// so the start is both several times closer in fit than a blind random
/// draw and inside the subspace the compressed objective actually senses;
/// multiplicative updates then skip most of the start-dependent burn-in.
/// If the reconstruction has rank below r, trailing factor columns fall
/// back to seeded positive noise at the data's entry scale.
pub fn init_factors_spectral_one_sided(
    c: &CompressedOneSided,
    r: usize,
    seed: u64,
) -> Result<FactorPair> {
    if r == 0 {
        return Err(Error::InvalidDim("factor rank must be positive".into()));
    }
    let at = c.a.matrix.transpose();
    let qa = crate::linalg::qr_thin(&at)?;
    let ra = qa.tr_mul(&at)?;
    let aat = c.a.matrix.mul_tr(&c.a.matrix)?;
    let w = solve_least_squares(&aat, &c.y)?;
    let z = ra.mul(&w)?;
    spectral_factors(&qa, &z, r, seed, c.x_frob)
}

/// Spectral initialization from a two-sided record.
///
/// The two-sided analogue of [`init_factors_spectral_one_sided`]: the
/// record's orthonormal basis Q₁ of col(X·A₂) parameterizes the captured
/// column space, the data expressed in it is recovered by the small
/// least-squares solve (A₁Q₁)·B₁ = Y₁, and factors are built from the
/// top-r singular triples of the reconstruction Q₁·B₁ exactly as in the
/// one-sided case (sign parts, mean-fill, jitter, rescale). With sketch
/// size equal to the exact rank of the data the reconstruction is the data
/// matrix itself. Memory stays in the compressed class throughout.
pub fn init_factors_spectral_two_sided(
    c: &CompressedTwoSided,
    r: usize,
    seed: u64,
) -> Result<FactorPair> {
    if r == 0 {
        return Err(Error::InvalidDim("factor rank must be positive".into()));
    }
    // Use at most as many basis columns as the left sketch has rows, so
    // the least-squares system stays square-or-tall.
    let take = c.q1.cols().min(c.a1.matrix.rows());
    let q1 = DenseMatrix::from_fn(c.q1.rows(), take, |i, j| c.q1.get(i, j));
    let a1q1 = c.a1.matrix.mul(&q1)?;
    let b1 = solve_least_squares(&a1q1, &c.y1)?;
    spectral_factors(&q1, &b1, r, seed, c.x_frob)
}

/// Fraction of a factor's mean kept entry used to fill the entries that the
/// dominant-sign split clips to zero. Hard zeros (or near-zero floors) are
/// poison for multiplicative updates — an entry's multiplicative growth
/// from 10⁻⁶ of scale costs more iterations than the basin choice saves,
/// and measured runs from hard-split starts all stall in one shared poor
/// basin. Filling at a substantial fraction of the kept-entry mean keeps
/// the spectral directions while giving every entry room to move in either
/// direction from step one.
const ZERO_FILL_FRACTION: f64 = 0.8;

/// Shared spectral-init core. The reconstruction is Q·Z with Q (m×p)
/// orthonormal, so its singular triples come from the p×p eigensolve of
/// Z·Zᵀ: values λ_j give s_j = √λ_j, left vectors are Q·e_j, right vectors
/// Zᵀe_j/s_j. Each of the leading r triples becomes a nonnegative rank-one
/// pair via its dominant-sign parts, with clipped entries refilled at
/// [`ZERO_FILL_FRACTION`] of the factor's mean kept entry; rank-deficient
/// trailing columns are filled with seeded positive noise.
fn spectral_factors(
    q: &DenseMatrix,
    z: &DenseMatrix,
    r: usize,
    seed: u64,
    x_frob: f64,
) -> Result<FactorPair> {
    let m = q.rows();
    let n = z.cols();
    let p = z.rows();
    let (lams, evecs) = crate::linalg::sym_eigen(&z.mul_tr(z)?)?;
    let left = q.mul(&evecs)?;
    let right = z.tr_mul(&evecs)?;
    let s_max = lams.get(0).max(0.0).sqrt();

    let mut stream = SeededStream::new(seed);
    let mut u = DenseMatrix::zeros(m, r);
    let mut v = DenseMatrix::zeros(n, r);
    // Entry scale for noise-filled columns: puts the column's rank-one
    // contribution near the data's mean-entry level.
    let fill = (x_frob / ((m as f64) * (n as f64)).sqrt() / r as f64)
        .max(f64::MIN_POSITIVE)
        .sqrt();
    for j in 0..r {
        let s_j = if j < p { lams.get(j).max(0.0).sqrt() } else { 0.0 };
        let mut assigned = false;
        if s_j > s_max * 1e-12 && s_max > 0.0 {
            let (mut up_sq, mut un_sq) = (0.0_f64, 0.0_f64);
            for i in 0..m {
                let e = left.get(i, j);
                if e >= 0.0 {
                    up_sq += e * e;
                } else {
                    un_sq += e * e;
                }
            }
            let (mut vp_sq, mut vn_sq) = (0.0_f64, 0.0_f64);
            for i in 0..n {
                let e = right.get(i, j) / s_j;
                if e >= 0.0 {
                    vp_sq += e * e;
                } else {
                    vn_sq += e * e;
                }
            }
            let mass_pos = up_sq.sqrt() * vp_sq.sqrt();
            let mass_neg = un_sq.sqrt() * vn_sq.sqrt();
            let (keep_pos, mass, u_nrm, v_nrm) = if mass_pos >= mass_neg {
                (true, mass_pos, up_sq.sqrt(), vp_sq.sqrt())
            } else {
                (false, mass_neg, un_sq.sqrt(), vn_sq.sqrt())
            };
            if mass > 0.0 {
                let coeff = (s_j * mass).sqrt();
                for i in 0..m {
                    let e = left.get(i, j);
                    let part = if keep_pos { e.max(0.0) } else { (-e).max(0.0) };
                    u.set(i, j, coeff * part / u_nrm);
                }
                for i in 0..n {
                    let e = right.get(i, j) / s_j;
                    let part = if keep_pos { e.max(0.0) } else { (-e).max(0.0) };
                    v.set(i, j, coeff * part / v_nrm);
                }
                assigned = true;
            }
        }
        if !assigned {
            for i in 0..m {
                u.set(i, j, fill * stream.next_uniform_open_closed(0.3, 1.0));
            }
            for i in 0..n {
                v.set(i, j, fill * stream.next_uniform_open_closed(0.3, 1.0));
            }
        }
    }
    for f in [&mut u, &mut v] {
        let hi = f.max_abs();
        let cut = hi * 1e-5;
        let (mut sum, mut kept) = (0.0_f64, 0usize);
        for &e in f.data().iter() {
            if e > cut {
                sum += e;
                kept += 1;
            }
        }
        let fill_val = ZERO_FILL_FRACTION * sum / kept.max(1) as f64;
        for entry in f.data_mut() {
            if *entry <= cut {
                *entry = fill_val;
            }
            *entry *= 1.0 + stream.next_uniform_open_closed(-0.05, 0.05);
        }
    }
    clip_and_rescale(u, v, x_frob)
}

/// Clips informed-init factors to a strictly positive floor and rescales
/// the pair so ‖UVᵀ‖_F matches the recorded data norm. The floor (10⁻⁶ of
/// each factor's largest entry) keeps multiplicative updates from locking
/// entries at exact zero while perturbing alignment negligibly.
fn clip_and_rescale(mut u: DenseMatrix, mut v: DenseMatrix, x_frob: f64) -> Result<FactorPair> {
    if !(x_frob > 0.0) || !x_frob.is_finite() {
        return Err(Error::Config(format!(
            "informed initialization needs a positive data norm, record has {x_frob}"
        )));
    }
    for f in [&mut u, &mut v] {
        let hi = f.data().iter().fold(0.0_f64, |acc, &e| acc.max(e));
        if !(hi > 0.0) {
            return Err(Error::Config(
                "informed initialization collapsed to zero; the record carries no usable data"
                    .into(),
            ));
        }
        let floor = hi * 1e-6;
        for e in f.data_mut() {
            if *e < floor {
                *e = floor;
            }
        }
    }
    let norm_sq = frob_product_factored(&gram(&u), &gram(&v))?;
    let alpha = (x_frob / norm_sq.sqrt()).sqrt();
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::NonFiniteUpdate);
    }
    for f in [&mut u, &mut v] {
        for e in f.data_mut() {
            *e *= alpha;
        }
    }
    FactorPair::new(u, v)
}

/// Iteration method for [`solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mu,
    Pgd,
}

/// Why [`solve`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    TolReached,
    TargetReached,
    Diverged,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::TolReached => "tol_reached",
            StopReason::TargetReached => "target_reached",
            StopReason::Diverged => "diverged",
        }
    }
}

/// Stopping rules and step parameters for [`solve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Window stop: halt when the relative objective change over the last
    /// `window` iterations is at most `rel_tol`. Inactive at 0 (run to
    /// max_iters / target / divergence), since a zero tolerance would
    /// spuriously stop oscillating gradient descent.
    pub rel_tol: f64,
    pub window: usize,
    /// Stop as soon as the objective is at or below this value.
    pub target_objective: Option<f64>,
    /// Constant step size for projected gradient descent.
    pub step_alpha: f64,
    /// Relative denominator guard coefficient for multiplicative updates.
    pub denom_guard: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 60_000,
            rel_tol: 0.0,
            window: 10,
            target_objective: None,
            step_alpha: 1e-3,
            denom_guard: 1e-12,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol >= 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::Config(format!(
                "rel_tol must be finite and >= 0, got {}",
                self.rel_tol
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if !(self.step_alpha > 0.0) {
            return Err(Error::Config(format!(
                "step_alpha must be > 0, got {}",
                self.step_alpha
            )));
        }
        if !(self.denom_guard > 0.0) {
            return Err(Error::Config(format!(
                "denom_guard must be > 0, got {}",
                self.denom_guard
            )));
        }
        Ok(())
    }
}

/// One objective evaluation along the iteration, with the per-term
/// breakdown in problem term order.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub wall_ms: f64,
    pub terms: Vec<f64>,
}

/// Outcome of [`solve`]: final factors, the objective trace (every
/// iteration, starting at iteration 0), and the stop reason.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub factors: FactorPair,
    pub trace: Vec<TracePoint>,
    pub stop_reason: StopReason,
}

/// Runs the chosen method until a stop rule fires.
///
/// Stop rules, in evaluation order after each step: divergence (non-finite
/// objective, or objective above 1e6 × the initial objective when the
/// initial objective is positive), target_objective reached, then the
/// rel_tol window test. The target is also checked at iteration 0, so an
/// infinite target stops immediately. A non-finite update inside a step
/// stops with `Diverged`; other step errors propagate.
pub fn solve(
    p: &SketchedMUProblem,
    f0: FactorPair,
    config: &SolverConfig,
    method: Method,
) -> Result<SolveResult> {
    config.validate()?;
    p.check_factors(&f0)?;
    if method == Method::Mu && !p.is_certified() {
        return Err(Error::UncertifiedProblem);
    }
    let start = Instant::now();
    // Taking f0 by value keeps exactly one live copy of the factors; at
    // large sizes a second copy would dominate the solver's working set.
    let mut f = f0;
    let mut trace = Vec::new();
    let terms0 = p.objective_terms(&f)?;
    let obj0: f64 = terms0.iter().sum();
    trace.push(TracePoint {
        iter: 0,
        objective: obj0,
        wall_ms: elapsed_ms(&start),
        terms: terms0,
    });
    if !obj0.is_finite() {
        return Ok(SolveResult {
            factors: f,
            trace,
            stop_reason: StopReason::Diverged,
        });
    }
    if let Some(t) = config.target_objective {
        if obj0 <= t {
            return Ok(SolveResult {
                factors: f,
                trace,
                stop_reason: StopReason::TargetReached,
            });
        }
    }
    let mut recent = vec![obj0];
    let mut stop_reason = StopReason::MaxIters;
    for iter in 1..=config.max_iters {
        let step = match method {
            Method::Mu => mu_step_in_place(p, &mut f, config.denom_guard),
            Method::Pgd => pgd_step_in_place(p, &mut f, config.step_alpha),
        };
        match step {
            Ok(()) => {}
            Err(Error::NonFiniteUpdate) => {
                stop_reason = StopReason::Diverged;
                break;
            }
            Err(other) => return Err(other),
        }
        let terms = p.objective_terms(&f)?;
        let obj: f64 = terms.iter().sum();
        trace.push(TracePoint {
            iter,
            objective: obj,
            wall_ms: elapsed_ms(&start),
            terms,
        });
        if !obj.is_finite() || (obj0 > 0.0 && obj > 1e6 * obj0) {
            stop_reason = StopReason::Diverged;
            break;
        }
        if let Some(t) = config.target_objective {
            if obj <= t {
                stop_reason = StopReason::TargetReached;
                break;
            }
        }
        recent.push(obj);
        if recent.len() > config.window + 1 {
            recent.remove(0);
        }
        if config.rel_tol > 0.0 && recent.len() == config.window + 1 {
            let prev = recent[0];
            let scale = prev.abs().max(obj.abs());
            if (prev - obj).abs() <= config.rel_tol * scale {
                stop_reason = StopReason::TolReached;
                break;
            }
        }
    }
    Ok(SolveResult {
        factors: f,
        trace,
        stop_reason,
    })
}

fn elapsed_ms(start: &Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
