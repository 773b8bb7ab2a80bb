use thiserror::Error;

use crate::model::{InstanceViolation, Time};

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance failed validation: {}", format_violations(.0))]
    InvalidInstance(Vec<InstanceViolation>),

    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("job {job} offered at release {release} but the simulator clock is already at {clock}")]
    ClockRegression { job: usize, release: Time, clock: Time },

    #[error("invariant violated at t={time}: {what}")]
    Invariant {
        time: Time,
        what: String,
        trace: Vec<String>,
    },

    #[error("oracle unavailable: {n} jobs exceeds the limit of {limit}")]
    OracleUnavailable { n: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invariant(time: Time, what: impl Into<String>) -> Self {
        Error::Invariant {
            time,
            what: what.into(),
            trace: Vec::new(),
        }
    }

    /// Attaches an event trace to an invariant breach; other variants pass through.
    pub(crate) fn with_trace(self, lines: Vec<String>) -> Self {
        match self {
            Error::Invariant { time, what, .. } => Error::Invariant {
                time,
                what,
                trace: lines,
            },
            other => other,
        }
    }
}

fn format_violations(v: &[InstanceViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
