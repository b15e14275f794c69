use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field '{field}': {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Core(#[from] gauge_strata::Error),

    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 2 for bad input, 3 for numerical or resource failures, 1 for output errors.
    pub fn exit_code(&self) -> u8 {
        use gauge_strata::Error as E;
        match self {
            CliError::Io { .. } | CliError::Parse(_) | CliError::Validation { .. } => 2,
            CliError::Core(E::InvalidInput(_)) => 2,
            CliError::Core(E::Divergent(_) | E::Numerical { .. } | E::ResourceLimit(_) | E::Internal(_)) => 3,
            CliError::Output(_) => 1,
        }
    }
}
