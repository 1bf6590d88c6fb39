use thiserror::Error;

pub type Result<T, E = GikfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GikfError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("{name} is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { name: String, min_eigenvalue: f64 },

    #[error("{name} is not positive definite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { name: String, min_eigenvalue: f64 },

    #[error("innovation covariance of sensor {sensor} is numerically singular")]
    SingularInnovation { sensor: usize },

    #[error("sensor index {index} out of range for {count} sensors")]
    SensorOutOfRange { index: usize, count: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid matching: {0}")]
    InvalidMatching(String),

    #[error("invalid gossip distribution: {0}")]
    InvalidDistribution(String),

    #[error("mean matrix is not irreducible")]
    NotIrreducible,

    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("modified walk Grammian is singular; weak detectability fails along this walk")]
    SingularGrammian,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("unsupported schema version {found} (supported major version {supported})")]
    SchemaVersion { found: String, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GikfError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        GikfError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
