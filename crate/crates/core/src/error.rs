use thiserror::Error;

pub type Result<T> = std::result::Result<T, RmstError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RmstError {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tau exceeds observable range (tau = {tau}, largest observed time = {max_time})")]
    TauOutOfRange { tau: f64, max_time: f64 },

    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("no events observed in {0}")]
    NoEvents(String),

    #[error("design matrix is rank deficient ({rows} x {cols})")]
    RankDeficient { rows: usize, cols: usize },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("censoring support exhausted: G(x) = 0 at x = {x} for subject {subject}")]
    CensoringSupportExhausted { subject: String, x: f64 },

    #[error("leave-one-out subsample without subject {subject} is invalid: {reason}")]
    LeaveOneOut { subject: String, reason: String },

    /// `row` is the 1-based line number in the file (the header is row 1).
    #[error("{file}: row {row}, column '{column}': {message}")]
    Data {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{0}")]
    Io(String),

    #[error("invalid scenario config: {0}")]
    Config(String),
}

impl From<std::io::Error> for RmstError {
    fn from(e: std::io::Error) -> Self {
        RmstError::Io(e.to_string())
    }
}
