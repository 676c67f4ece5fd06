use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible spaces: {0}")]
    IncompatibleSpace(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("undefined angle: {0}")]
    UndefinedAngle(String),

    #[error("geodesic is not unique: {0}")]
    NonuniqueGeodesic(String),

    #[error("outside of the convexity regime: {0}")]
    OutOfRegime(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    SolverFailure { iterations: usize, gradient_norm: f64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
