use thiserror::Error;

use crate::pressure::DimensionBracket;

/// Errors raised by the analysis kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular or non-finite matrix")]
    SingularInput,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}", validation_message(*.index, .reason))]
    Validation { index: Option<usize>, reason: String },

    #[error("budget exceeded: {requested} cylinders requested, budget is {budget}")]
    BudgetExceeded { budget: u64, requested: u128 },

    #[error("budget exceeded before the tolerance was met; best bracket [{}, {}] at level {}", .0.t_lo, .0.t_hi, .0.n)]
    BracketBudget(Box<DimensionBracket>),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("resolution error: cell size {h} exceeds delta/4 = {limit}")]
    Resolution { h: f64, limit: f64 },

    #[error("vector lies within tolerance of the invariant hyperplane")]
    NearHyperplane,

    #[error("no cone entry after {iterations} iterations")]
    NoEntry { iterations: usize },
}

fn validation_message(index: Option<usize>, reason: &str) -> String {
    match index {
        // Human-readable map indices are 1-based.
        Some(i) => format!("validation error in map {}: {reason}", i + 1),
        None => format!("validation error: {reason}"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::HypothesisViolated(msg.into())
    }
}
