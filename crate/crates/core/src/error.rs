use thiserror::Error;

/// Errors raised by the numerical routines, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum SblError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent input: {0}")]
    Divergent(String),

    #[error("leading coefficient is zero; not a cubic")]
    DegenerateLeading,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("active-set system is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("incremental bookkeeping drifted from the dense recomputation by {deviation:.3e}")]
    Drift { deviation: f64 },

    #[error("reference signal is identically zero")]
    ZeroTruth,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SblError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SblError::Divergent(_) | SblError::Singular { .. } | SblError::Drift { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, SblError>;
