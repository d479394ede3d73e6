use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// The CLI maps variants onto exit codes through [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("variable index {index} is out of range for arity {arity}")]
    VariableOutOfRange { index: usize, arity: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input must be strictly positive, got {value} at coordinate {index}")]
    NonPositive { index: usize, value: String },

    #[error("scale parameter must satisfy t > 1, got {0}")]
    InvalidScale(String),

    #[error("exact evaluation requires integer t-exponents, found {0}")]
    NonIntegerExponent(String),

    #[error("exact mode unavailable: {0}")]
    InexactMode(String),

    #[error("projection is undefined at 1/2{}", index.map(|i| format!(" (stream index {i})")).unwrap_or_default())]
    Midpoint { index: Option<usize> },

    #[error("invalid interval map: {0}")]
    InvalidMap(String),

    #[error("precision exhausted at {precision} bits: estimated rounding error {estimated_error}")]
    PrecisionExhausted { precision: u32, estimated_error: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn syntax(position: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            position,
            message: message.into(),
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::VariableOutOfRange { .. } => "variable_out_of_range",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonPositive { .. } => "nonpositive",
            Error::InvalidScale(_) => "invalid_scale",
            Error::NonIntegerExponent(_) => "non_integer_exponent",
            Error::InexactMode(_) => "inexact_mode",
            Error::Midpoint { .. } => "midpoint",
            Error::InvalidMap(_) => "invalid_map",
            Error::PrecisionExhausted { .. } => "precision_exhausted",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// 2 for configuration/validation problems, 3 for numeric or domain
    /// failures, 4 for a stream hitting the midpoint of the projection.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::VariableOutOfRange { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidMap(_)
            | Error::Config(_) => 2,
            Error::Midpoint { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
