use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The amplitude precision matrix could not be factorized even after jitter.
    #[error("degenerate geometry: amplitude system is not positive definite ({0})")]
    DegenerateGeometry(String),

    /// `s_k` came out non-positive, which happens for near-duplicate components.
    #[error("ill-conditioned detection statistic (1/s = {inv_s:e})")]
    Conditioning { inv_s: f64 },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
