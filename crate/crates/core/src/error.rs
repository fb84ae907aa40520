use thiserror::Error;

/// Errors raised by the numerical kernels and the operator-file reader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported geometry `{0}` (expected circle, flat_torus_2d or sphere_2)")]
    UnsupportedGeometry(String),

    #[error("ellipticity violated at {context}: margin {margin:e}")]
    NotElliptic { context: String, margin: f64 },

    #[error("contour cannot separate the spectrum: {0}")]
    Contour(String),

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("radial integration failed at mode {mode}: {reason}")]
    Ode { mode: i64, reason: String },

    #[error("transversality failure at mode {mode}: margin {margin:e}")]
    Transversality { mode: i64, margin: f64 },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("{op}: {message}")]
    Numerical { op: &'static str, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn numerical(op: &'static str, message: impl Into<String>) -> Self {
        Error::Numerical {
            op,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed input files rather than numerics.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Schema { .. } | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
