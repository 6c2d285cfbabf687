use std::path::PathBuf;

use thiserror::Error;

use crate::cost::Evaluation;
use crate::model::PolicyPlan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of an operation (time past the horizon,
    /// an empty truncation interval, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter or plan that breaks a type invariant.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// The linear drift model would produce a negative attenuation factor.
    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("numeric failure at t = {time:.4} days: {reason}")]
    Numeric { time: f64, reason: String },

    /// No candidate of the grid satisfies every constraint.
    #[error("infeasible grid: {evaluated} candidates evaluated, none feasible")]
    InfeasibleGrid {
        evaluated: u64,
        least_violating: Option<Box<(PolicyPlan, Evaluation)>>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("malformed CSV {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Config(_) | Error::Invalid { .. } | Error::Domain(_) => 3,
            Error::Numeric { .. } | Error::ModelValidity(_) => 4,
            Error::InfeasibleGrid { .. } => 5,
            Error::Io { .. } | Error::Csv { .. } => 6,
        }
    }
}
