use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score vector needs at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("score vector contains a non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{name} = {value} out of range [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    #[error("conditional distribution is invalid: {0}")]
    InvalidDistribution(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("inconsistent class count: expected {expected}, got {got}")]
    ClassMismatch { expected: usize, got: usize },

    #[error("invalid loss spec {spec:?}: {reason}")]
    InvalidLoss { spec: String, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("hinge counterexample condition unsatisfiable for C={classes}, K={k}: {reason}")]
    Infeasible {
        classes: usize,
        k: usize,
        reason: String,
    },

    #[error("training diverged at epoch {epoch}: non-finite loss (learning rate too high?)")]
    Diverged { epoch: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(name: &'static str, value: usize, min: usize, max: usize) -> Result<()> {
    if value < min || value > max {
        Err(Error::OutOfRange {
            name,
            value,
            min,
            max,
        })
    } else {
        Ok(())
    }
}
