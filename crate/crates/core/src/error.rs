//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Contract and I/O failures surfaced by the toolkit.
///
/// The I/O-flavoured variants (`Io`, `Json`, `Format`) signal unusable input
/// files; every other variant is a violated precondition or invariant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be 2 or 4, got {0}")]
    BadDimension(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not Hermitian: max |H[i][j] - conj(H[j][i])| = {0:.3e}")]
    NotHermitian(f64),

    #[error("trace must be 1 within 1e-9, got {0}")]
    NonUnitTrace(f64),

    #[error("trace product has non-negligible imaginary part {0:.3e}")]
    NonRealExpectation(f64),

    #[error("state vector is not normalized: sum |amplitude|^2 = {0}")]
    NotNormalized(f64),

    #[error("mixed state has no state-vector representation: purity {purity} < 1 - {tol:.1e}")]
    MixedState { purity: f64, tol: f64 },

    #[error("vector is not unit length: |v| = {0}")]
    NotUnitVector(f64),

    #[error("invalid outcome model: {0}")]
    InvalidModel(String),

    #[error("model/condition mismatch: {0}")]
    KindMismatch(String),

    #[error("dataset contains no events")]
    EmptyDataset,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("out-of-range argument: {0}")]
    OutOfRange(String),

    #[error(
        "evidence diverges: outcome {outcome} has model probability {probability:.3e} \
         but was observed {count} times"
    )]
    DivergentEvidence {
        outcome: String,
        probability: f64,
        count: u64,
    },

    #[error("Fisher information is singular at theta = {theta}: |E| = {e_abs}")]
    SingularFisher { theta: f64, e_abs: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    /// True for errors caused by unreadable or malformed files rather than
    /// violated analysis contracts.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_) | Error::Format { .. })
    }
}
