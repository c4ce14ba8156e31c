use thiserror::Error;

/// Errors raised by the library layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nonlinear term evaluation failed: {0}")]
    Evaluation(String),

    /// The point handed to a simplicity check is not a trivial solution.
    #[error("not a trivial solution: residual {residual:.3e}, sphere defect {sphere:.3e}, eps {eps:.3e}")]
    NotTrivial { residual: f64, sphere: f64, eps: f64 },

    /// The augmented Jacobian at a start point does not have a one-dimensional kernel.
    #[error("singular start: augmented Jacobian kernel has dimension {kernel_dim}")]
    SingularStart { kernel_dim: usize },

    /// Tangent at a simple trivial solution is tangent to the slice eps = 0.
    #[error("transversality violated at start: |eps-component| = {eps_component:.3e}")]
    Transversality { eps_component: f64 },

    #[error("Newton corrector did not converge (residual {residual:.3e} after {iterations} iterations)")]
    CorrectionFailure { residual: f64, iterations: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
