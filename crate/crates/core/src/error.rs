use alloc::boxed::Box;

use crate::compression::CompressionReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("scenario set is empty")]
    EmptyScenarioSet,

    #[error("feasible set is empty: budget {budget} exceeds capacity {capacity}")]
    InfeasibleSet { budget: f64, capacity: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("{stage} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("root of the wait-and-judge polynomial is not bracketed in (0, 1)")]
    RootBracketing,

    #[error("all simplex weights fall below the support tolerance")]
    DegenerateWeights,

    #[error("compression aborted after {} of the scenarios were examined: {source}", .partial.examined)]
    CompressionAborted {
        partial: Box<CompressionReport>,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected,
                found,
            })
        }
    }
}
