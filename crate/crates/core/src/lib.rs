//! Multi-target detection and localization for noncoherent MIMO radar with
//! widely separated antennas.
//!
//! The pipeline is: [`geometry`] (delays, range bins) → [`signal`] (waveforms,
//! echo synthesis, whitening) → [`likelihood`] (per-path concentrated
//! log-likelihoods over a grid) → [`estimators`] (joint search, successive
//! space removal, successive interference cancellation) → [`harness`]
//! (scenario files, Monte Carlo sweeps, metrics).

pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod likelihood;
pub mod signal;

use thiserror::Error;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Likelihood(#[from] likelihood::LikelihoodError),
    #[error(transparent)]
    Estimator(#[from] estimators::EstimatorError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
}
