//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Error`]; the CLI maps
//! variants onto process exit codes (see `main.rs`).

use thiserror::Error;

/// Alias for `std::result::Result` with the crate error type.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A column's residual norm fell below the rank tolerance during QR.
    #[error("rank deficient at column {column}: residual norm below tolerance")]
    RankDeficient { column: usize },

    /// Operand shapes are inconsistent for the requested operation.
    #[error("dimension mismatch in {context}: {details}")]
    DimMismatch {
        context: &'static str,
        details: String,
    },

    /// A dimension argument is out of range (for example k > m).
    #[error("invalid dimension: {0}")]
    InvalidDim(String),

    /// Nonnegative input contained a negative entry.
    #[error("negative entry {value} at ({row}, {col}); input must be nonnegative")]
    NegativeData { row: usize, col: usize, value: f64 },

    /// A matrix was constructed with a NaN or infinite entry.
    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteData { row: usize, col: usize },

    /// The shift is below the certified minimum for the sketch operator.
    #[error("sigma {given} on the {side} side is below the required minimum {required}")]
    InsufficientSigma {
        side: &'static str,
        given: f64,
        required: f64,
    },

    /// The regularization weight is outside the range the update rule allows.
    #[error("lambda {lambda} outside allowed range {allowed}")]
    LambdaOutOfRange { lambda: f64, allowed: &'static str },

    /// A solver step produced a NaN or infinite factor entry.
    #[error("solver step produced a non-finite update")]
    NonFiniteUpdate,

    /// Multiplicative updates require a problem with certified nonnegativity.
    #[error("multiplicative updates require a certified problem (sum-of-Grams and sum-of-targets entrywise nonnegative)")]
    UncertifiedProblem,

    /// The sketch operator must have orthonormal rows for this operation.
    #[error("operation requires a sketch with orthonormal rows ({0})")]
    NotOrthonormal(String),

    /// The data matrix is identically zero where a norm is required.
    #[error("data matrix has zero Frobenius norm")]
    ZeroData,

    /// The reconstruction UVᵀ is identically zero where a norm is required.
    #[error("factor product has zero Frobenius norm")]
    ZeroFactors,

    /// A data or config file failed to parse.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// A dense matrix request exceeds the configured element budget.
    #[error("dense size {rows}x{cols} exceeds the element budget {budget}")]
    DimOverflow {
        rows: usize,
        cols: usize,
        budget: usize,
    },

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error.
    ///
    /// 2 = configuration/input error, 3 = numeric failure, 4 = I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RankDeficient { .. } | Error::NonFiniteUpdate | Error::UncertifiedProblem => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
