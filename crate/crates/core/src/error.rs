use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MerlError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("site {site} out of range for a register with {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("invalid register: {0}")]
    InvalidRegister(String),

    #[error("operands live on different registers ({left:?} vs {right:?})")]
    RegisterMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("partial trace needs at least one kept site")]
    EmptyKeepSet,

    #[error("site collision: {0}")]
    SiteCollision(String),

    /// Conditioning on an outcome whose probability fell under the pruning
    /// threshold.
    #[error("zero-probability condition (p = {probability:.3e})")]
    ZeroProbabilityCondition { probability: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("too many controls for exhaustive order search: {controls} > {max}")]
    TooManyControls { controls: usize, max: usize },

    /// Two formulations of the same quantity disagree beyond tolerance.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("numerical error: {0}")]
    Numeric(String),
}

pub type MerlResult<T> = Result<T, MerlError>;
