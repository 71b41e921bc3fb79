//! Error taxonomy shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HfcError>;

#[derive(Debug, Error)]
pub enum HfcError {
    /// `z I - A` is singular or numerically indistinguishable from singular.
    #[error("singular resolvent: {0}")]
    SingularResolvent(String),

    /// No common eigenbasis within tolerance (defective or non-commuting input).
    #[error("not simultaneously diagonalizable: {0}")]
    NotSimultaneouslyDiagonalizable(String),

    /// An eigenvalue lies on the branch cut (-inf, 0] of the principal power.
    #[error("branch cut violation: {0}")]
    BranchCutViolation(String),

    /// Evaluation point outside the declared sector domain.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// Contour angle does not separate the spectrum from the function domain.
    #[error("angle order violation: {0}")]
    AngleOrderViolation(String),

    /// Calibration integral below the resolution threshold.
    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    /// Estimated sectoriality type too large for the requested construction.
    #[error("type too large: {0}")]
    TypeTooLarge(String),

    /// Problem file failed schema validation.
    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Shape/dimension mismatch between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Invalid parameter value for an operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative kernel failed to converge to its required residual.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl HfcError {
    /// CLI exit code class: input errors exit 2, everything else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            HfcError::SchemaError(_) | HfcError::Io(_) | HfcError::InvalidParameter(_) => 2,
            _ => 1,
        }
    }
}
