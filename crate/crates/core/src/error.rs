use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown access point `{0}`")]
    UnknownAp(String),

    #[error("unknown station `{0}`")]
    UnknownStation(String),

    #[error("unknown rate tier {0}")]
    UnknownTier(usize),

    #[error("statistic undefined: {0}")]
    UndefinedStat(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("experiment spec error: {0}")]
    Spec(String),

    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Diagnostics produced while reading a scenario file. Each variant names
/// the offending field and, where known, where it appears.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error{}: {message}", fmt_location(*.line, *.column))]
    Syntax {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },

    #[error("unknown field `{field}`{}", fmt_location(*.line, *.column))]
    UnknownField {
        field: String,
        line: Option<usize>,
        column: Option<usize>,
    },

    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn fmt_location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" at line {l}, column {c}"),
        (Some(l), None) => format!(" at line {l}"),
        _ => String::new(),
    }
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
