use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(String),

    #[error("no rows for symbol `{0}`")]
    MissingSymbol(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("non-positive price {price} at row {row}")]
    NonPositivePrice { row: usize, price: f64 },

    #[error("duplicate timestamp {timestamp} for symbol `{symbol}`")]
    DuplicateTimestamp { symbol: String, timestamp: i64 },

    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("insufficient timestamp overlap: {common} common observations")]
    InsufficientOverlap { common: usize },

    #[error("regressor has zero variance")]
    DegenerateRegressor,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample has zero variance")]
    DegenerateSample,

    #[error("optimizer did not converge after {iterations} iterations (best point {best:?})")]
    NonConvergence { iterations: usize, best: Vec<f64> },

    #[error("no family could be fitted: {}", format_failures(.0))]
    AllFitsFailed(Vec<(String, String)>),

    #[error("theta = {theta} outside the domain of the {family} copula")]
    ThetaOutOfDomain { family: &'static str, theta: f64 },

    #[error("boundary input u = {u}, v = {v}")]
    BoundaryInput { u: f64, v: f64 },

    #[error("epsilon = {0} must lie in (0, 0.5)")]
    EpsilonOutOfRange(f64),

    #[error("need at least 2 non-base symbols, got {0}")]
    NotEnoughSymbols(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn format_failures(failures: &[(String, String)]) -> String {
    failures
        .iter()
        .map(|(family, reason)| format!("{family}: {reason}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
