use thiserror::Error;

/// Errors surfaced by the estimation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("accounting error: {0}")]
    Accounting(String),

    #[error("sequencing error: expected step {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("undefined state: {0}")]
    UndefinedState(String),

    #[error("observation {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    pub fn at_replication(self, index: usize) -> Self {
        Error::Replication {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
