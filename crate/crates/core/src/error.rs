use thiserror::Error;

pub type Result<T> = std::result::Result<T, FormboundError>;

#[derive(Debug, Error)]
pub enum FormboundError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field must be in the space domain")]
    NotSpaceDomain,

    #[error("domain too small: half-length {half_length} but {required} is required")]
    DomainTooSmall { half_length: f64, required: f64 },

    #[error("grid does not tile into dyadic cubes: {0}")]
    Alignment(String),

    #[error("cost guard: {what} needs {needed} units, limit is {limit}")]
    CostGuard {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("set diameter {diameter} exceeds the limit {limit}")]
    Diameter { diameter: f64, limit: f64 },

    #[error("negative values are not allowed (minimum {min})")]
    Negative { min: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e}, target {target:e}")]
    Quadrature { estimate: f64, target: f64 },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("malformed preset: {0}")]
    Preset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FormboundError::InvalidArgument(msg.into()))
}
