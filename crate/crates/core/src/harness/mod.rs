//! Scenario files, Monte Carlo trials, metrics and sweeps.

mod config;
mod experiment;
mod metrics;
pub mod rng;
mod sweep;

use thiserror::Error;

pub use config::{
    load_scenario, DetectionConfig, ExperimentConfig, LayoutConfig, NoiseConfig, RegionConfig,
    ScenarioConfig, TargetConfig, WaveformConfig,
};
pub use experiment::{associate, valid_detection, Association, Experiment, TargetResult, TrialOutcome, VALID_RADIUS};
pub use metrics::{aggregate, export_csv, parse_csv, write_csv, MetricsRecord, CSV_HEADER};
pub use sweep::{run_sweep, JournalEntry, RunKind, SweepOptions, SweepOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
    #[error("journal {path} was written by a different run ({found}); remove it or choose another output directory")]
    JournalMismatch { path: String, found: String },
    #[error("trial {trial} at {snr_db} dB: {source}")]
    Trial {
        trial: usize,
        snr_db: f64,
        #[source]
        source: Box<crate::Error>,
    },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Likelihood(#[from] crate::likelihood::LikelihoodError),
    #[error(transparent)]
    Estimator(#[from] crate::estimators::EstimatorError),
}

impl HarnessError {
    /// Whether the failure lies in the scenario or threshold inputs rather than the run itself.
    pub fn is_config(&self) -> bool {
        use crate::estimators::EstimatorError as E;
        use crate::likelihood::LikelihoodError as L;
        use crate::signal::SignalError as S;
        match self {
            HarnessError::Config { .. } | HarnessError::Geometry(_) => true,
            HarnessError::Signal(e) => matches!(
                e,
                S::InvalidWaveform(_) | S::InsufficientBandwidthTime { .. } | S::InvalidCovariance(_) | S::DenseTooLarge { .. }
            ),
            HarnessError::Likelihood(e) => matches!(e, L::BadGrid(_)),
            HarnessError::Estimator(e) => matches!(
                e,
                E::ThresholdFile(_)
                    | E::BadWeights
                    | E::InvalidPfa(_)
                    | E::TooFewTrials { .. }
                    | E::ZeroGMax
                    | E::JointTooLarge { .. }
                    | E::TooManyTuples { .. }
            ),
            _ => false,
        }
    }
}
