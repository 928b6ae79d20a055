//! Full-data evaluation metrics, compressed-side diagnostics, and
//! convergence-trace checks.
//!
//! This is the only module that touches the full data matrix after
//! compression; solvers see compressed records exclusively. Metrics are
//! still computed through factored identities so even evaluation never
//! materializes an m×n reconstruction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, frob_product_factored, gram, qr_thin, DenseMatrix};
use crate::objectives::{obj_full, FactorPair, ORTHONORMAL_TOL};
use crate::sketching::{Side, SketchOperator};
use crate::solvers::TracePoint;

/// Evaluation summary of one factorization run. `residual_projection` and
/// `rescaled_relative_error` are filled only where they apply (data-adapted
/// sketches and ridge-regularized runs respectively).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub relative_error: f64,
    pub cosine_similarity: f64,
    pub objective_terms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_projection: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescaled_relative_error: Option<f64>,
}

/// ‖X − UVᵀ‖_F / ‖X‖_F, via the factored residual identity.
pub fn relative_error(x: &DenseMatrix, f: &FactorPair) -> Result<f64> {
    let x_norm_sq = x.frob_norm_sq();
    if x_norm_sq == 0.0 {
        return Err(Error::ZeroData);
    }
    Ok((obj_full(x, f)? / x_norm_sq).sqrt())
}

/// ‖X − c·UVᵀ‖_F / ‖X‖_F for a reconstruction rescaled by c = 1 + λ; the
/// ridge objective biases the fitted product down by that factor.
pub fn rescaled_relative_error(x: &DenseMatrix, f: &FactorPair, lambda: f64) -> Result<f64> {
    let x_norm_sq = x.frob_norm_sq();
    if x_norm_sq == 0.0 {
        return Err(Error::ZeroData);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::LambdaOutOfRange {
            lambda,
            allowed: "[0, inf)",
        });
    }
    let c = 1.0 + lambda;
    let xtu = x.tr_mul(f.u())?;
    let cross = dot(xtu.data(), f.v().data());
    let quad = frob_product_factored(&gram(f.u()), &gram(f.v()))?;
    let resid_sq = (x_norm_sq - 2.0 * c * cross + c * c * quad).max(0.0);
    Ok((resid_sq / x_norm_sq).sqrt())
}

/// ⟨X, UVᵀ⟩ / (‖X‖_F ‖UVᵀ‖_F), with the inner product evaluated as
/// Tr[Vᵀ(XᵀU)]. Lies in [0, 1] for nonnegative inputs.
pub fn cosine_similarity(x: &DenseMatrix, f: &FactorPair) -> Result<f64> {
    let x_norm_sq = x.frob_norm_sq();
    if x_norm_sq == 0.0 {
        return Err(Error::ZeroData);
    }
    let quad = frob_product_factored(&gram(f.u()), &gram(f.v()))?;
    if quad <= 0.0 {
        return Err(Error::ZeroFactors);
    }
    let xtu = x.tr_mul(f.u())?;
    let cross = dot(xtu.data(), f.v().data());
    Ok((cross / (x_norm_sq.sqrt() * quad.sqrt())).clamp(0.0, 1.0))
}

/// ‖P⊥_A X‖_F: the part of X outside the sketch's captured subspace.
///
/// When the operator is orthonormal this is sqrt(‖X‖² − ‖sketch(X)‖²)
/// directly; otherwise an orthonormal basis of the operator's row space
/// (left) or column space (right) is built by QR first.
pub fn residual_projection_norm(x: &DenseMatrix, a: &SketchOperator) -> Result<f64> {
    let x_norm_sq = x.frob_norm_sq();
    let captured_sq = match a.side {
        Side::Left => {
            if a.matrix.cols() != x.rows() {
                return Err(Error::DimMismatch {
                    context: "residual_projection_norm",
                    details: format!(
                        "left operator acts on {} rows, data has {}",
                        a.matrix.cols(),
                        x.rows()
                    ),
                });
            }
            if a.orthonormality_defect() <= ORTHONORMAL_TOL {
                a.matrix.mul(x)?.frob_norm_sq()
            } else {
                let q = qr_thin(&a.matrix.transpose())?;
                q.tr_mul(x)?.frob_norm_sq()
            }
        }
        Side::Right => {
            if a.matrix.rows() != x.cols() {
                return Err(Error::DimMismatch {
                    context: "residual_projection_norm",
                    details: format!(
                        "right operator acts on {} columns, data has {}",
                        a.matrix.rows(),
                        x.cols()
                    ),
                });
            }
            if a.orthonormality_defect() <= ORTHONORMAL_TOL {
                x.mul(&a.matrix)?.frob_norm_sq()
            } else {
                let q = qr_thin(&a.matrix)?;
                x.mul(&q)?.frob_norm_sq()
            }
        }
    };
    Ok((x_norm_sq - captured_sq).max(0.0).sqrt())
}

/// Result of a monotonicity check over an objective trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotoneCheck {
    pub is_monotone: bool,
    /// Index t of the first pair with obj_{t+1} > obj_t · (1 + slack).
    pub first_violation: Option<usize>,
}

/// Checks that a solver trace is nonincreasing within a relative slack:
/// obj_{t+1} ≤ obj_t · (1 + slack_rel) for every consecutive pair.
pub fn check_monotone(trace: &[TracePoint], slack_rel: f64) -> MonotoneCheck {
    let values: Vec<f64> = trace.iter().map(|p| p.objective).collect();
    check_monotone_values(&values, slack_rel)
}

/// [`check_monotone`] over raw objective values.
pub fn check_monotone_values(values: &[f64], slack_rel: f64) -> MonotoneCheck {
    for t in 0..values.len().saturating_sub(1) {
        let allowed = values[t] + slack_rel * values[t].abs();
        if !(values[t + 1] <= allowed) {
            return MonotoneCheck {
                is_monotone: false,
                first_violation: Some(t),
            };
        }
    }
    MonotoneCheck {
        is_monotone: true,
        first_violation: None,
    }
}
