use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The matrix is not strictly below `gamma^2 I`; the associated
    /// maximization is unbounded.
    #[error("matrix not contractive: lambda_max = {lambda_max:e} >= gamma^2 = {gamma_sq:e} (within tolerance)")]
    NotContractive { lambda_max: f64, gamma_sq: f64 },

    #[error("matrix not positive definite: lambda_min = {lambda_min:e}")]
    NotPositive { lambda_min: f64 },

    #[error("gamma = {gamma} is too small{}", model.map(|i| format!(" for model {i}")).unwrap_or_default())]
    GammaTooSmall { gamma: f64, model: Option<usize> },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no certificate found at gamma = {gamma} (margin {margin:e})")]
    InfeasibleAtGamma { gamma: f64, margin: f64 },

    #[error("disturbance energy is zero")]
    ZeroDisturbance,

    #[error("value grid too coarse: grid_tol {grid_tol:e} exceeds {threshold:e}")]
    GridTooCoarse { grid_tol: f64, threshold: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
