use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("map produced non-finite coordinates for particle {index}")]
    NonFinite { index: usize },
    #[error("space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("geodesic between the given points is not unique{0}")]
    NonUnique(String),
    #[error("operation `{op}` is not supported on space {space}")]
    Unsupported { op: &'static str, space: String },
    #[error("resolution too fine: {cells:e} cells exceed the cap of {cap:e}")]
    TooManyCells { cells: f64, cap: f64 },
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("problem size {rows}x{cols} exceeds the cap {cap}")]
    SizeCap { rows: usize, cols: usize, cap: usize },
    #[error("excluded mass fraction {fraction} exceeds the limit {limit}")]
    ExcessiveExclusion { fraction: f64, limit: f64 },
    #[error("serialization: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
