//! Error type shared by every module of the crate.
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("nonpositive population {pop} on unit {unit:?}")]
    NonpositivePopulation { unit: String, pop: f64 },

    #[error("duplicate unit id {0:?}")]
    DuplicateId(String),

    #[error("invalid edge #{index} [{a}, {b}]: {reason}")]
    InvalidEdge {
        index: usize,
        a: usize,
        b: usize,
        reason: &'static str,
    },

    #[error("disconnected graph: unit {unreachable:?} is not reachable from unit {root:?}")]
    Disconnected { root: String, unreachable: String },

    #[error("size mismatch: expected {expected} units, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to build a seed plan after {attempts} attempts")]
    SeedFailed { attempts: usize },

    #[error("enumeration guard exceeded: n = {n} > {limit}")]
    EnumerationGuard { n: usize, limit: usize },

    #[error("probability mass {total} does not sum to 1")]
    ProbabilityMass { total: f64 },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("chain stalled after {rejections} consecutive rejections at step {step}")]
    Stall { rejections: u64, step: u64 },

    #[error("theta kind {0} has no contingency-table evaluator")]
    UnsupportedTheta(&'static str),

    #[error("relative error undefined: a probe has zero d² to the centroid")]
    ZeroDistance,

    #[error("all committee votes are zero")]
    ZeroVotes,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
