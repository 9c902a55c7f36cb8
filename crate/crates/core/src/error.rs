use std::io;

use thiserror::Error;

/// Errors produced across the training core, the pipeline phases and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration error at `{key}`: {message}")]
    ConfigKey { key: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("state error: {0}")]
    State(String),

    #[error("sequencing error: expected epoch {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("noise estimation failed: {0}")]
    Estimation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("training starvation: {0}")]
    Starvation(String),

    #[error("phase `{phase}` failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigKey {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::ConfigKey { .. } => true,
            Error::Phase { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attaches a pipeline phase name to an error.
pub(crate) trait PhaseContext<T> {
    fn phase(self, phase: &'static str) -> Result<T>;
}

impl<T> PhaseContext<T> for Result<T> {
    fn phase(self, phase: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            already @ Error::Phase { .. } => already,
            other => Error::Phase {
                phase,
                source: Box::new(other),
            },
        })
    }
}
