//! Monte Carlo sweep over the calibration weight deviation: runs the
//! estimator with and without weight estimation on identical data and
//! writes per-sigma averages as CSV.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::PathBuf;

pub use config::ExperimentConfig;
pub use output::{emit_outputs, ensure_writable};
pub use sweep::{aggregate, run_sweep, Aggregate, Mode, TrialRecord};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<fvsbl::Error> for ExperimentError {
    fn from(e: fvsbl::Error) -> Self {
        ExperimentError::Config(e.to_string())
    }
}
