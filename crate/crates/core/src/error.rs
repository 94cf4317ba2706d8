use thiserror::Error;

/// Errors reported by the solvers and builders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("metric is not positive-definite on triangle {triangle}: {detail}")]
    Assembly { triangle: usize, detail: String },

    #[error("metric not admissible at alpha = {alpha}: dirichlet gap {gap} <= 0")]
    NotAdmissible { alpha: f64, gap: f64 },

    #[error("factorization failed at pivot {pivot} (value {value})")]
    Factorization { pivot: usize, value: f64 },

    #[error("eigenvalue search did not converge: {0}")]
    Nonconvergence(String),

    #[error("derivative is ambiguous: sigma_1 cluster of size {cluster} is broken by the direction")]
    AmbiguousDerivative { cluster: usize },

    #[error("continuation failed at r = {last_good}: {detail}")]
    Continuation { last_good: f64, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
