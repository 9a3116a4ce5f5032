use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    /// An argument lies outside the domain of the function (e.g. `r <= 0`).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid parameters, grids or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Field and operator live on different grids, or lengths disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// An iterative eigen-solve did not reach the requested tolerance.
    #[error("eigensolver did not converge after {iterations} cycles (best residual {best_residual:.3e})")]
    Solver {
        iterations: usize,
        best_residual: f64,
    },

    /// Singular factorization, overflow and similar numerical breakdowns.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A computed quantity violates the inequality it is supposed to certify.
    #[error("physics check failed: {0}")]
    Physics(String),

    /// Reading configuration or prior outputs, or writing results.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
