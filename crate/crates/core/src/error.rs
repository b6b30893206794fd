use thiserror::Error;

/// Errors shared by the path algebra, holonomy integrator, and the
/// finite-difference operators built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    /// Composition was attempted where the first path does not end at the
    /// base point of the second (per-coordinate deviation exceeds 1e-12).
    #[error("endpoint mismatch: paths do not meet (max coordinate deviation {0:.3e})")]
    EndpointMismatch(f64),

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("direction index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),

    /// A probe displacement left the chart of a section.
    #[error("probe step {step:.3e} exceeds section radius {radius:.3e}")]
    RadiusExceeded { step: f64, radius: f64 },

    #[error("directions are linearly dependent")]
    DependentDirections,

    #[error("base dimension {dim} too small: need at least {needed}")]
    DimTooSmall { dim: usize, needed: usize },

    /// Structural or numeric precondition failure not covered by a more
    /// specific variant (bad scheme, algebra invariant violation, ...).
    #[error("{0}")]
    Invalid(String),

    /// Text-format parse failure; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
