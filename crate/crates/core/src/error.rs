use std::path::PathBuf;

/// Errors shared across the crate.
///
/// DSL errors carry their own positioned type ([`crate::dsl::DslError`]) and are
/// wrapped here when they cross module boundaries.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point ({x:.3}, {y:.3}) lies outside the region grid; clamp or drop it")]
    OutOfRegion { x: f64, y: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{source_name}, line {line}: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("descriptor dimension mismatch: expected {expected}, got {actual}")]
    DescriptorDim { expected: usize, actual: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("raster is {actual_w}x{actual_h} but the grid is {expected_w}x{expected_h} cells")]
    RasterShape {
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
    },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Dsl(#[from] crate::dsl::DslError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode failed for {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn malformed(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
