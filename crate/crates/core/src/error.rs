use std::path::PathBuf;

/// Errors produced by the pipeline library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid template {template_id:?}: {reason}")]
    InvalidTemplate { template_id: String, reason: String },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("backend returned an empty completion")]
    EmptyCompletion,

    #[error("decomposition contains no generations")]
    EmptyDecomposition,

    #[error("every document failed to decompose ({0} failures)")]
    AllDocumentsFailed(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-norm vector in cosine similarity")]
    ZeroNorm,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("no positive labels")]
    NoPositives,

    #[error("missing decompositions for {} item(s): {}", .0.len(), .0.join(", "))]
    MissingDecompositions(Vec<String>),

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("unknown document {0:?}")]
    UnknownDocument(String),

    #[error("empty vocabulary after preprocessing")]
    EmptyVocabulary,

    #[error("singular design matrix; collinear columns: {}", .0.join(", "))]
    SingularDesign(Vec<String>),

    #[error("optimizer did not converge after {evaluations} evaluations; trace: {trace}")]
    NonConvergence { evaluations: usize, trace: String },

    #[error("observation sets differ between models")]
    ObservationMismatch,

    #[error("no legislator pairs have usable features")]
    NoUsablePairs,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
