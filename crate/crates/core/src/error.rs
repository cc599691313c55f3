use thiserror::Error;

/// Errors produced by the framework.
///
/// Variants map one-to-one onto the C status codes exported by the FFI crate,
/// so adding a variant means adding a code there too.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("buffer lifecycle violation: {0}")]
    Lifecycle(String),

    #[error("target allocation failed: requested {requested} doubles, {available} available")]
    Alloc { requested: usize, available: usize },

    #[error("operation overlaps an in-flight launch: {0}")]
    Concurrency(String),

    #[error("constant type conflict for key `{key}`: stored {stored}, got {given}")]
    Type {
        key: String,
        stored: &'static str,
        given: &'static str,
    },

    #[error("missing constant `{0}`")]
    MissingConstant(String),

    #[error("invalid launch plan: {0}")]
    Plan(String),

    #[error("buffer belongs to another device")]
    Device,

    #[error("kernel contract violation: {0}")]
    ContractViolation(String),

    #[error("singular state at site {site}: rho = {rho}")]
    SingularState { site: usize, rho: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
