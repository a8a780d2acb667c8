use thiserror::Error;

pub type Result<T, E = MpError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpError {
    /// An entry does not fit in the target precision.
    #[error("entry ({row}, {col}) = {value:e} overflows the target precision")]
    OverflowDetected { row: usize, col: usize, value: f64 },

    /// Exactly zero pivot in the given column.
    #[error("zero pivot in column {0}")]
    SingularPivot(usize),

    /// A solve or residual produced inf/NaN. Carries whatever history was recorded.
    #[error("non-finite value produced during {stage}")]
    NonFiniteResult {
        stage: &'static str,
        rhist: Vec<f64>,
        dhist: Vec<f64>,
    },

    #[error("invalid precision configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid problem size {0}")]
    InvalidSize(usize),

    #[error("Krylov solve did not converge in {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },
}

impl MpError {
    pub(crate) fn non_finite(stage: &'static str) -> Self {
        MpError::NonFiniteResult {
            stage,
            rhist: Vec::new(),
            dhist: Vec::new(),
        }
    }

    pub(crate) fn with_history(self, r: &[f64], d: &[f64]) -> Self {
        match self {
            MpError::NonFiniteResult { stage, .. } => MpError::NonFiniteResult {
                stage,
                rhist: r.to_vec(),
                dhist: d.to_vec(),
            },
            other => other,
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(MpError::DimensionMismatch { expected, found })
    }
}
