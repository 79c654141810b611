use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero {0} is not in the open upper half-plane")]
    NonUpperHalfZero(String),
    #[error("point {0} is not in the open upper half-plane")]
    NonUpperHalfPoint(String),
    #[error("evaluation point {0} coincides with a pole")]
    PoleHit(String),
    #[error("infinite zero set without a usable tail bound: {0}")]
    TailNotBounded(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("function is not certified integrable against dt/(1+t^2): {0}")]
    NotIntegrable(String),
    #[error("integrand is unbounded near x = {0}")]
    SingularitySwamp(f64),
    #[error("sequence point {0} is not real")]
    NonRealPoint(String),
    #[error("density bracket is not exact ({lower}, {upper})")]
    InexactBracket { lower: f64, upper: f64 },
    #[error("Gram matrix condition number {cond:.3e} exceeds {limit:.1e}; spread the basis points further apart")]
    IllConditionedBasis { cond: f64, limit: f64 },
    #[error("degenerate interpolation system: {0}")]
    DegenerateSystem(String),
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("function is not square integrable on the line: {0}")]
    NotSquareIntegrable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable identifier used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonUpperHalfZero(_) => "NonUpperHalfZero",
            Error::NonUpperHalfPoint(_) => "NonUpperHalfPoint",
            Error::PoleHit(_) => "PoleHit",
            Error::TailNotBounded(_) => "TailNotBounded",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::NotIntegrable(_) => "NotIntegrable",
            Error::SingularitySwamp(_) => "SingularitySwamp",
            Error::NonRealPoint(_) => "NonRealPoint",
            Error::InexactBracket { .. } => "InexactBracket",
            Error::IllConditionedBasis { .. } => "IllConditionedBasis",
            Error::DegenerateSystem(_) => "DegenerateSystem",
            Error::ToleranceNotMet(_) => "ToleranceNotMet",
            Error::Hypothesis(_) => "Hypothesis",
            Error::NotSquareIntegrable(_) => "NotSquareIntegrable",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
