use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    /// Adjacent energy variances are too close for the boundary closed form.
    #[error("degenerate spacing between symbols {index} and {next}: relative variance gap {rel_gap:e}", next = index + 1)]
    DegenerateSpacing { index: usize, rel_gap: f64 },

    /// The residual power of the last symbol came out nonpositive.
    #[error("infeasible power budget: residual last-symbol power {residual:e} is not positive")]
    InfeasibleBudget { residual: f64 },

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("grid too large: {points} candidate points exceeds limit {limit}")]
    GridTooLarge { points: f64, limit: f64 },
}
