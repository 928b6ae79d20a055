//! Nonnegative matrix factorization learned directly from sketched data.
//!
//! The pipeline compresses a nonnegative matrix `X` once through one or two
//! linear sketches (`Y = A·X`, and optionally `Y2 = X·A2`) and then fits
//! nonnegative factors `U·Vᵀ ≈ X` using only the compressed record — the
//! solvers never form an m×n matrix. Because a sketched residual
//! `‖A(X − U·Vᵀ)‖²` alone cannot keep multiplicative updates stable (the
//! Gram `AᵀA` has negative entries), each objective carries a rank-one
//! shift `σ‖1ᵀ(X − U·Vᵀ)‖²` with σ at or above a certified minimum, plus a
//! λ-weighted regularizer that controls the component of `U·Vᵀ` the sketch
//! cannot see.
//!
//! Modules:
//!
//! - [`sketching`]: sketch operators (Gaussian, orthonormal rows,
//!   rangefinder), compressed records, certified shift minima.
//! - [`objectives`]: the three compressed objectives in factored form.
//! - [`solvers`]: Gram-term problems, multiplicative and projected-gradient
//!   updates, and the stop-rule driver.
//! - [`eval`]: full-data metrics and trace monotonicity checks.
//! - [`datagen`]: synthetic low-rank data and matrix file I/O.
//! - [`cli`]: the experiment config and pipeline commands used by the
//!   `cnmf` binary.
//!
//! # Example
//!
//! ```
//! use cnmf::datagen::{synthetic_lognormal, SyntheticSpec};
//! use cnmf::sketching::{compress_one_sided, sample_gaussian_sketch, shift_sigma, Side};
//! use cnmf::solvers::{build_problem_one_sided_ridge, init_factors, solve, Method, SolverConfig};
//!
//! # fn main() -> cnmf::Result<()> {
//! let spec = SyntheticSpec { m: 40, n: 30, r: 4, seed: 7, distribution: Default::default() };
//! let (x, _truth) = synthetic_lognormal(&spec)?;
//!
//! // Compress once; everything after this line works off the record.
//! let a = sample_gaussian_sketch(10, x.rows(), 1, None, Side::Left)?;
//! let record = compress_one_sided(&x, &a)?;
//!
//! let sigma = shift_sigma(&record.a).value;
//! let problem = build_problem_one_sided_ridge(&record, 4, 0.1, sigma)?;
//! let f0 = init_factors(record.m, record.n, 4, 3, 0.5)?;
//! let config = SolverConfig { max_iters: 100, ..SolverConfig::default() };
//! let result = solve(&problem, f0, &config, Method::Mu)?;
//! assert!(result.trace.last().unwrap().objective <= result.trace[0].objective);
//! # Ok(())
//! # }
//! ```

pub mod cli;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod objectives;
pub mod sketching;
pub mod solvers;

mod linalg;
mod matio;
mod rng;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Vector};
