use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes of the operands do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// An argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Problem data violates a standing hypothesis (e.g. singular A).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A factorization or solve broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Stage data requested outside the available range.
    #[error("stage {index} unavailable (problem defines {available} stages)")]
    Range { index: usize, available: usize },

    /// A property that the theory guarantees failed to hold numerically.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("at stage {index}: {source}")]
    AtStage {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_stage(self, index: usize) -> Self {
        match self {
            e @ Error::AtStage { .. } => e,
            e => Error::AtStage {
                index,
                source: Box::new(e),
            },
        }
    }

    /// Strips any stage annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of numerical origin (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self.root(), Error::Numerical(_) | Error::Consistency(_))
    }
}
