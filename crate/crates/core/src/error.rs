use thiserror::Error;

/// Errors raised by grid construction, field operations and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("non-positive conductivity {value} at node {index}")]
    NonPositiveConductivity { index: usize, value: f64 },

    #[error("invalid conductivity model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("incompatible boundary flux: total {total:e} exceeds {limit:e}")]
    IncompatibleFlux { total: f64, limit: f64 },

    #[error("current is not divergence free: relative divergence {relative:e}")]
    NotDivergenceFree { relative: f64 },

    #[error("unknown manufactured case '{0}'")]
    UnknownCase(String),

    #[error("problem too large for dense factorization: {nodes} nodes (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    #[error("dense factorization failed")]
    Singular,
}

pub type Result<T> = std::result::Result<T, Error>;
