use thiserror::Error;

/// Errors produced by trace parsing, graph construction, and the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A line of a text input could not be parsed.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// Input parsed but violates a structural invariant.
    #[error("{0}")]
    Structure(String),

    /// An argument is outside the accepted domain.
    #[error("{0}")]
    InvalidArgument(String),

    /// The operation refuses to run on this input (a configured limit is exceeded).
    #[error("{0}")]
    Refused(String),

    /// A pipeline stage failed; carries the stage name for diagnostics.
    #[error("stage '{stage}': {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
