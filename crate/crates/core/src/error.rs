use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants are grouped by how a caller should react: `Domain`,
/// `Degenerate`, `Regime` and `Precondition` mean the inputs are outside the
/// hypotheses of the routine, `Divergence` means an improper integral does
/// not converge for the given data.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("divergent integral: {0}")]
    Divergence(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("too few nodes: need at least {needed}, got {got}")]
    TooFewNodes { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn divergence(msg: impl Into<String>) -> Self {
        Error::Divergence(msg.into())
    }

    /// True for errors that signal a non-convergent integral.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
