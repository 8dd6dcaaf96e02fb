use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Intersection,
    Approximation,
    Consensus,
    Optimization,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Intersection => "constraint intersection",
            Stage::Approximation => "proxy approximation",
            Stage::Consensus => "consensus",
            Stage::Optimization => "polynomial optimization",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate interval [{lo}, {hi}]: need lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degree cap {cap} exceeded; last check error {last_error:e}")]
    DegreeCapExceeded { cap: usize, last_error: f64 },

    #[error("graph not connected after {attempts} attempts")]
    NotConnectedAfterRetries { attempts: usize },

    #[error("constraint sets do not intersect: [{lo}, {hi}]")]
    EmptyIntersection { lo: f64, hi: f64 },

    #[error("consensus did not stop within {cap} rounds")]
    RoundCapExceeded { cap: usize },

    #[error("numerical failure in SDP solver: {reason} (condition estimate {condition:e})")]
    NumericalFailure { reason: String, condition: f64 },

    #[error("SDP solver hit {iters} iterations with gap {gap:e}")]
    MaxIters { iters: usize, gap: f64 },

    #[error("{stage}: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::InStage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of floating point machinery rather than of the instance.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NumericalFailure { .. } | Error::MaxIters { .. } | Error::RoundCapExceeded { .. }
        )
    }
}
