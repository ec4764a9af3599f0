use thiserror::Error;

/// Errors raised by the divergence, oracle and sampling machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mean {value} outside the {family} domain")]
    Domain { family: &'static str, value: f64 },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("not implemented for {0}")]
    NotImplemented(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e}, best value {value:.6e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        value: f64,
        best_weights: Vec<f64>,
    },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{failed} of {total} runs failed (first: {first})")]
    Batch { failed: usize, total: usize, first: String },

    #[error("output error: {0}")]
    Output(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}
