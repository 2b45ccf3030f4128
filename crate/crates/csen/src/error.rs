//! Error type shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dictionary column has zero norm and cannot be normalized.
    #[error("degenerate atom: column {col} has zero norm")]
    DegenerateAtom { col: usize },

    /// A linear solve or factorization failed, or a residual check was not met.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// Noise level requested relative to a zero measurement.
    #[error("undefined SNR: measured signal D*x is zero")]
    UndefinedSnr,

    /// Restricted least squares met a rank-deficient sub-dictionary.
    #[error("rank-deficient system on support {support:?}")]
    RankDeficient { support: Vec<usize> },

    /// The exhaustive support search would enumerate too many subsets.
    #[error("combinatorial guard exceeded: C({n},{k}) > {limit}")]
    CombinatorialGuard { n: usize, k: usize, limit: u64 },

    /// Malformed binary file (CSM1, checkpoint, IDX). Offset is the first
    /// byte that could not be interpreted.
    #[error("format error in {path:?} at byte {offset}: {what}")]
    Format {
        path: PathBuf,
        offset: u64,
        what: String,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
