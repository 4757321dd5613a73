//! Joint wideband channel estimation and antenna-array self-calibration.
//!
//! A measurement across `P` antennas and `N` subcarriers is modeled as a sum
//! of specular paths, each with a delay, an angle of arrival and a complex
//! amplitude, seen through unknown per-element complex calibration weights.
//! [`estimator::run_fvsbl`] estimates the number of paths, their parameters,
//! the weights and the noise level with fast variational sparse Bayesian
//! learning.

pub mod array_model;
pub mod channel_sim;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod simplex;
pub mod vsbl;

pub use array_model::{ArrayGeometry, DispersionParams, ObservationModel, SignalGrid};
pub use error::{Error, Result};
pub use estimator::{run_fvsbl, EstimationResult, EstimatorConfig};
