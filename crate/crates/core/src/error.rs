use thiserror::Error;

/// Errors raised by the geometric and analytic routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("matrix is not on the Stiefel manifold: max |U^tU - I| = {residual:.3e} exceeds {tolerance:.1e}{hint}")]
    NotOnManifold {
        residual: f64,
        tolerance: f64,
        hint: &'static str,
    },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("domain error in `{node}`: {message}")]
    Domain { node: String, message: String },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("size cap exceeded: np = {np} > {cap}")]
    SizeCap { np: usize, cap: usize },

    #[error("malformed input at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("tangency violated: max |U^tV + V^tU| = {0:.3e}")]
    NotTangent(f64),
}

impl Error {
    /// Whether this error stems from the input rather than from numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Degenerate(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
