use thiserror::Error;

/// Errors raised by mesh construction, energy evaluation and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// A boundary edge shrank below the length at which unit tangents are meaningful.
    #[error("collapsed boundary: edge {edge} has length {length:e}")]
    DegenerateBoundary { edge: usize, length: f64 },

    #[error("zero-area triangle {0}")]
    DegenerateTriangle(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The boundary curvature vanishes, so the Frenet normal is undefined there.
    #[error("inflection point at arclength s = {arclength:.6}")]
    Inflection { arclength: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
