use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("gradient requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),

    #[error("tensor (node {0}) is disconnected from the differentiated output")]
    Disconnected(usize),

    #[error("tensors belong to different graphs")]
    ForeignGraph,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("rank {s} out of range 1..={d}")]
    RankOutOfRange { s: usize, d: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown dataset kind `{0}` (expected swiss_roll, s_curve or hyperplane)")]
    UnknownDataset(String),

    #[error("training diverged at iteration {iter}: non-finite {what}")]
    Diverged { iter: usize, what: String },

    #[error("{path}: line {line}: {msg}")]
    Csv {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
