use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(
        "metric is not positive definite at node {node} (smallest eigenvalue {min_eigenvalue:e})"
    )]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },
    #[error("spectral gap collapsed: lambda2 - lambda1 = {gap:e}")]
    GapCollapse { gap: f64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },
    #[error("contour radius {radius:e} outside the safe annulus (0, {limit:e})")]
    ContourRadius { radius: f64, limit: f64 },
    #[error("shift {z} lies within {distance:e} of the spectrum")]
    NearSpectrum { z: String, distance: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("flow lost positivity at t = {t}")]
    PositivityLoss { t: f64 },
    #[error("flow left the neighborhood at t = {t} (C2 distance {distance:e})")]
    Divergence { t: f64, distance: f64 },
    #[error("unknown norm kind `{0}`")]
    UnknownNormKind(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// `true` for errors caused by bad input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            LabError::Config(_)
                | LabError::Json(_)
                | LabError::UnknownNormKind(_)
                | LabError::InvalidGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
