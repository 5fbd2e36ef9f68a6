use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("`{op}` is not available for domain kind `{kind}`")]
    Capability { op: &'static str, kind: &'static str },

    #[error("boundary points coincide (parameter gap {gap:e})")]
    Diagonal { gap: f64 },

    #[error("corner singularity at boundary parameter {t}")]
    Corner { t: f64 },

    #[error("quadrature did not converge: estimated error {achieved:e} > requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("series did not converge after {terms} terms (tail {tail:e})")]
    Series { terms: usize, tail: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("profile is not monotone at node {index}")]
    NotMonotone { index: usize },

    #[error("singular Jacobian")]
    Singular,

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
