use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("variable `{name}` = {value} violates bounds [{lower}, {upper}]")]
    BoundViolation {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("variable `{name}` level {level} is outside 1..={levels}")]
    LevelOutOfRange {
        name: String,
        level: usize,
        levels: usize,
    },

    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation matrix factorization failed: {0}")]
    Factorization(String),

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("constant response, indices undefined")]
    ConstantResponse,

    #[error("candidate set exhausted")]
    CandidatesExhausted,

    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input data or bad arguments).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Factorization(_) | Error::FitFailed(_) | Error::ConstantResponse
        )
    }

    pub(crate) fn parse(source: &str, line: usize, column: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source.to_string(),
            line,
            column,
            message: msg.into(),
        }
    }
}
