use thiserror::Error;

use crate::conic::SolveStatus;

/// Crate-wide error type. Variants carry enough context to identify the
/// offending user/AP/iteration without a debugger.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A user whose channel is identically zero cannot meet any positive SINR
    /// target; surfaced at program-build time rather than as solver failure.
    #[error("user {user} has a zero channel{}", ap.map(|m| format!(" at ap {m}")).unwrap_or_default())]
    ZeroChannel { user: usize, ap: Option<usize> },

    #[error("conic solver returned {status:?}{}{}",
        ap.map(|m| format!(" (ap {m})")).unwrap_or_default(),
        iteration.map(|t| format!(" at iteration {t}")).unwrap_or_default())]
    SolverFailure {
        status: SolveStatus,
        ap: Option<usize>,
        iteration: Option<usize>,
    },

    #[error("missing interference report from ap {ap} at iteration {iteration}")]
    MissingReport { ap: usize, iteration: usize },

    #[error("ensemble aborted: {failures} of {total} realizations failed")]
    EnsembleAborted { failures: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
