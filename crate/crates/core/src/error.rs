use std::path::PathBuf;

/// Errors produced anywhere in the library.
///
/// Every message names the module at fault and, where one exists, the file,
/// line, or instance id that triggered it.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{module}: i/o error on {path}: {source}")]
    Io {
        module: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{module}: parse error in {path} line {line}: {message}")]
    Parse {
        module: &'static str,
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{module}: validation error for instance {id}: {field}: {message}")]
    Validation {
        module: &'static str,
        id: String,
        field: &'static str,
        message: String,
    },

    #[error("{module}: invalid input: {source}")]
    InvalidInput {
        module: &'static str,
        #[source]
        source: InputError,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("retrieval: query {query:?} failed: {message}")]
    Retrieval { query: String, message: String },

    #[error("scorer: non-finite loss for instance {id}")]
    NonFinite { id: String },

    #[error("scorer: shape mismatch: {0}")]
    Shape(String),

    #[error("checkpoint: {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("pipeline: stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pipeline: {0}")]
    Pipeline(String),
}

/// Argument-level failures of pure operations (length mismatch, ranges).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InputError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(module: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            module,
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(module: &'static str, source: InputError) -> Self {
        Error::InvalidInput { module, source }
    }

    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
