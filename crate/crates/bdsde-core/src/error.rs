//! Error type shared by every module of the crate.

use alloc::string::String;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong while building inputs or running a scheme.
///
/// `Config` and `Precondition` indicate bad inputs; the remaining variants
/// indicate numerical failure during a run.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value (non-positive horizon, zero paths, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation's stated precondition does not hold for these inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A user callable or a simulated quantity produced a non-finite value.
    #[error("non-finite {what} at path {path}, step {step}")]
    NonFinite {
        what: &'static str,
        path: usize,
        step: usize,
    },

    /// Mismatched dimensions between generator, bundle or ensemble.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The regression normal equations could not be factored even with the
    /// configured ridge.
    #[error("regression system singular at step {step} (condition estimate {cond:e})")]
    SingularRegression { step: usize, cond: f64 },

    /// The implicit fixed-point iteration ran out of iterations.
    #[error("Picard iteration did not converge at step {step}: residual {residual:e} after {iters} iterations")]
    PicardDiverged {
        step: usize,
        residual: f64,
        iters: usize,
    },

    /// The nested Monte Carlo oracle would exceed its sub-simulation budget.
    #[error("oracle budget exceeded: {required} sub-simulations requested, budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
