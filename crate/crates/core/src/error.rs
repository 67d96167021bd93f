use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate gradient at {point:?}: |grad f| = {norm:e}")]
    DegenerateGradient { point: [f64; 3], norm: f64 },

    #[error("perturbed surface leaves the bounding ball (epsilon = {epsilon})")]
    PerturbationTooLarge { epsilon: f64 },

    #[error("scene validation failed: {0}")]
    Validation(String),

    #[error("scene has no perturbation family")]
    NoPerturbationFamily,

    #[error("time reversal mismatch: {0}")]
    ReversalMismatch(String),

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scene parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
