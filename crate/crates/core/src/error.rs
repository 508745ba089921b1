use thiserror::Error;

/// Every failure the library can report.
///
/// Variants follow the error names used throughout the crate docs so callers
/// (and the CLI) can map them onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("events out of order: {0}")]
    Order(String),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("illuminant error: {0}")]
    Illuminant(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("config error in stage `{stage}`: {message}")]
    Config { stage: String, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            stage: stage.into(),
            message: message.into(),
        }
    }

    /// Short machine-friendly name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Range(_) => "RangeError",
            Error::Invariant(_) => "InvariantError",
            Error::Order(_) => "OrderError",
            Error::Annotation(_) => "AnnotationError",
            Error::Shape(_) => "ShapeError",
            Error::EmptyInput(_) => "EmptyInputError",
            Error::Precondition(_) => "PreconditionError",
            Error::Illuminant(_) => "IlluminantError",
            Error::Fit(_) => "FitError",
            Error::Config { .. } => "ConfigError",
            Error::InsufficientData(_) => "InsufficientDataError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    /// True when the failure is caused by the caller's input or configuration
    /// rather than by a defect in the library.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Fit(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
