use crate::schedule::QrpReport;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid corridor: {}", .0.join("; "))]
    InvalidCorridor(Vec<String>),

    #[error("invalid schedule delay function: {0}")]
    InvalidScheduleDelay(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "root finding did not converge for window length {length} after {iterations} iterations"
    )]
    NonConvergence { length: f64, iterations: usize },

    #[error("QRP condition violated (worst margin {:.6e}{})", .0.worst_margin, .0.first_violation_text())]
    QrpConditionViolated(Box<QrpReport>),

    #[error(
        "priced bottlenecks {subset:?} are not contiguous from the most upstream bottleneck {n}; \
         a set such as {{2}} in a three-bottleneck corridor can break the consistency condition"
    )]
    NonContiguousSubset { subset: Vec<usize>, n: usize },

    #[error("subset index {index} is outside 1..={n}")]
    InvalidSubset { index: usize, n: usize },

    #[error("horizon too small: {detail}")]
    HorizonTooSmall { detail: String },
}

impl Error {
    /// Stable identifier used by the CLI in machine-readable output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCorridor(_) => "InvalidCorridor",
            Error::InvalidScheduleDelay(_) => "InvalidScheduleDelay",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::QrpConditionViolated(_) => "QrpConditionViolated",
            Error::NonContiguousSubset { .. } => "NonContiguousSubset",
            Error::InvalidSubset { .. } => "InvalidSubset",
            Error::HorizonTooSmall { .. } => "HorizonTooSmall",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
