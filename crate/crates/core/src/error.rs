use std::path::PathBuf;

/// Errors raised anywhere in the emotion-space pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("value {value} of variable `{variable}` outside raw range [{min}, {max}]")]
    Range {
        variable: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("cannot project format `{from}` onto `{to}`: variable `{missing}` is missing")]
    Projection {
        from: String,
        to: String,
        missing: String,
    },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("state error: {0}")]
    State(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: missing column `{column}`")]
    Schema { path: PathBuf, column: String },
    #[error("{path}:{line}: duplicate item `{key}`")]
    Duplicate {
        path: PathBuf,
        line: u64,
        key: String,
    },
    #[error("joining `{0}` and `{1}` produced no shared items")]
    EmptyJoin(String, String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
