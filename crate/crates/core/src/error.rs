use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constitutive function was evaluated outside its domain.
    #[error("{function} is undefined at s = {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Newton iteration gave up; carries the last residual norm.
    #[error("solver failed after {iterations} iterations (residual {residual:.3e}): {reason}")]
    SolverFailure {
        reason: String,
        iterations: usize,
        residual: f64,
    },

    #[error("line search could not keep the density positive (residual {residual:.3e})")]
    LineSearch { residual: f64 },

    /// Pseudo-time march hit its step budget.
    #[error("no steady state after {steps} pseudo-time steps (residual {residual:.3e})")]
    NonConvergence {
        steps: usize,
        residual: f64,
        history: Vec<crate::ns::HistoryRow>,
    },

    #[error(
        "density became non-positive at pseudo-time step {step}; lower cfl/dt0 or enable hyper4"
    )]
    NegativeDensity {
        step: usize,
        history: Vec<crate::ns::HistoryRow>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64) -> Self {
        Error::Domain { function, value }
    }

    /// Residual history carried by pseudo-time failures, if any.
    pub fn history(&self) -> Option<&[crate::ns::HistoryRow]> {
        match self {
            Error::NonConvergence { history, .. } | Error::NegativeDensity { history, .. } => {
                Some(history)
            }
            _ => None,
        }
    }
}
