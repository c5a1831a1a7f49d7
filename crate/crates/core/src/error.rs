use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("normal-equations matrix is numerically singular")]
    Singular,

    #[error("column {0} of the channel matrix is zero")]
    DegenerateColumn(usize),

    /// A non-finite value showed up inside the iterative detector.
    #[error("numerical failure at iteration {iteration}, symbol index {index}")]
    NumericalFailure { iteration: usize, index: usize },

    #[error("search space of {size} candidates exceeds the exhaustive-search limit")]
    Capacity { size: f64 },

    /// A Monte Carlo cell exceeded the tolerated fraction of failed trials.
    #[error(
        "{failed} failed trials in cell detector={detector} snr={snr_db} dB; \
         first failure: trial {trial}, iteration {iteration}, index {index}"
    )]
    TrialFailures {
        detector: String,
        snr_db: f64,
        failed: u64,
        trial: u64,
        iteration: usize,
        index: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
