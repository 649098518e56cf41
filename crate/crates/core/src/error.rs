use std::path::PathBuf;

/// Errors produced by the clustering, training and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum CpcError {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("zero-norm row {0} cannot be normalized")]
    ZeroNorm(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("nothing clustered")]
    NothingClustered,

    #[error("no clustered samples")]
    NoClusteredSamples,

    #[error("cluster {cluster} out of range (bank holds {clusters} centers)")]
    ClusterOutOfRange { cluster: usize, clusters: usize },

    #[error("degenerate feature: vector has zero variance")]
    DegenerateFeature,

    #[error("infeasible synthetic configuration: {0}")]
    Infeasible(String),

    #[error("malformed csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("invalid config at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("metadata required but not present")]
    MissingMeta,

    #[error("digest mismatch for {path}: manifest has {expected}, file has {found}")]
    DigestMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CpcError> = std::result::Result<T, E>;

impl CpcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CpcError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        CpcError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
