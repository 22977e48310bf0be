use thiserror::Error;

/// Errors produced by manifold, retraction, and optimizer routines.
#[derive(Debug, Error)]
pub enum RimError {
    #[error("shape mismatch: expected {expected}, got {got} in {context}")]
    ShapeMismatch {
        expected: String,
        got: String,
        context: &'static str,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),

    #[error("point is not on the manifold: {0}")]
    OffManifold(String),

    #[error("{method} did not converge after {iterations} iterations (row residual {residual_row:.3e}, positivity residual {residual_pos:.3e}, column residual {residual_cols:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual_row: f64,
        residual_pos: f64,
        residual_cols: f64,
    },

    #[error("dual ascent diverged after {iterations} iterations (residual {residual:.3e}); try a smaller step")]
    DualDivergence { iterations: usize, residual: f64 },

    #[error("numerical overflow in {0}; try a smaller step t")]
    Overflow(&'static str),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RimError>;
