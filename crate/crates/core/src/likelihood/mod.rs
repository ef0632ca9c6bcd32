//! Concentrated log-likelihoods, reflection-coefficient estimates and the
//! gridded objective.
//!
//! Everything here works in whitened coordinates: observations have already
//! been multiplied by `W = R^{-1/2}` and replicas are whitened on the fly, so
//! the noise covariance is the identity.

pub mod export;
mod field;
mod grid;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{AntennaLayout, Position2D};
use crate::signal::{steering_vector, SignalError, SteeringVector, WaveformSet, Whitener};

pub use field::{objective_field, FieldPlan, ObjectiveField};
pub use grid::Grid;

/// Gram matrices worse conditioned than this are treated as singular.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error)]
pub enum LikelihoodError {
    #[error("coincident delays; reflection coefficients unidentifiable (min delay gap {gap_samples:.3} samples, condition {condition:e})")]
    CoincidentDelays { gap_samples: f64, condition: f64 },
    #[error("replica has zero energy")]
    ZeroEnergy,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("observation for path {path} is not whitened")]
    NotWhitened { path: usize },
    #[error("expected {expected} observations, got {got}")]
    ObservationCount { expected: usize, got: usize },
    #[error("{expected} whiteners needed, got {got}")]
    WhitenerCount { expected: usize, got: usize },
    #[error("empty target list")]
    NoTargets,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed grid file: {0}")]
    Format(String),
}

/// Everything needed to turn a location into a whitened replica on each path.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    pub layout: AntennaLayout,
    pub waveforms: WaveformSet,
    /// One per path, layout path order.
    pub whiteners: Vec<Whitener>,
}

impl ObservationModel {
    pub fn new(
        layout: AntennaLayout,
        waveforms: WaveformSet,
        whiteners: Vec<Whitener>,
    ) -> Result<Self, LikelihoodError> {
        if whiteners.len() != layout.path_count() {
            return Err(LikelihoodError::WhitenerCount {
                expected: layout.path_count(),
                got: whiteners.len(),
            });
        }
        Ok(Self { layout, waveforms, whiteners })
    }

    pub fn path_count(&self) -> usize {
        self.layout.path_count()
    }

    /// Whitened replica `W s~` of a scatterer at `theta` on path `path`.
    pub fn whitened_replica(&self, path: usize, theta: &Position2D) -> Result<SteeringVector, SignalError> {
        let s = steering_vector(&self.waveforms, self.layout.path(path), theta, &self.layout)?;
        Ok(whiten_replica(s, &self.whiteners[path]))
    }

    /// Delay difference between two locations on a path, in samples.
    pub fn delay_gap_samples(&self, path: usize, a: &Position2D, b: &Position2D) -> f64 {
        let p = self.layout.path(path);
        (self.layout.delay(a, p) - self.layout.delay(b, p)).abs() / self.waveforms.sample_interval()
    }
}

pub(crate) fn whiten_replica(s: SteeringVector, w: &Whitener) -> SteeringVector {
    match w {
        Whitener::Scalar { inv_sigma } => SteeringVector {
            values: s.values.iter().map(|v| v * *inv_sigma).collect(),
            ..s
        },
        Whitener::Dense(_) => SteeringVector {
            values: w.apply(&s.to_dense()),
            start: 0,
            ..s
        },
    }
}

/// Single-target log-likelihood on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoglik {
    pub value: f64,
    /// The replica vanished (outside the window or zero energy); `value` is 0.
    pub degenerate: bool,
}

/// `l = 0.5 |s^H r|^2 / (s^H s)` with whitened `s` and `r`.
pub fn path_loglik(
    theta: &Position2D,
    r: &[Complex64],
    model: &ObservationModel,
    path: usize,
) -> PathLoglik {
    let degenerate = PathLoglik { value: 0.0, degenerate: true };
    let Ok(s) = model.whitened_replica(path, theta) else {
        return degenerate;
    };
    let e = s.energy();
    if !(e > 0.0) {
        return degenerate;
    }
    PathLoglik {
        value: 0.5 * s.dot(r).norm_sqr() / e,
        degenerate: false,
    }
}

/// `alpha = (s^H r) / (s^H s)`.
pub fn alpha_mle_isolated(
    theta: &Position2D,
    r: &[Complex64],
    model: &ObservationModel,
    path: usize,
) -> Result<Complex64, LikelihoodError> {
    let s = model.whitened_replica(path, theta)?;
    let e = s.energy();
    if !(e > 0.0) {
        return Err(LikelihoodError::ZeroEnergy);
    }
    Ok(s.dot(r) / e)
}

/// Whitened Gram matrix `S^H S` of a set of replicas on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<Complex64>,
    /// Ratio of extreme eigenvalues; infinite when singular.
    pub condition: f64,
    /// Smallest pairwise delay difference in samples; infinite for one replica.
    pub min_delay_gap: f64,
}

impl GramMatrix {
    pub fn from_replicas(replicas: &[SteeringVector], delays_samples: &[f64]) -> Self {
        let g = replicas.len();
        let values = DMatrix::from_fn(g, g, |i, j| replicas[i].inner(&replicas[j]));
        let mut min_delay_gap = f64::INFINITY;
        for i in 0..g {
            for j in (i + 1)..g {
                min_delay_gap = min_delay_gap.min((delays_samples[i] - delays_samples[j]).abs());
            }
        }
        let eig = values.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        Self { values, condition, min_delay_gap }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    /// Eigenvalues above `1e-10` of the largest.
    pub fn numerical_rank(&self) -> usize {
        let eig = self.values.clone().symmetric_eigen().eigenvalues;
        let hi = eig.max();
        eig.iter().filter(|&&l| l > 1e-10 * hi).count()
    }

    pub fn is_singular(&self) -> bool {
        self.min_delay_gap < 1.0 || !(self.condition <= MAX_CONDITION)
    }
}

pub fn gram_matrix(
    thetas: &[Position2D],
    model: &ObservationModel,
    path: usize,
) -> Result<GramMatrix, LikelihoodError> {
    if thetas.is_empty() {
        return Err(LikelihoodError::NoTargets);
    }
    let p = model.layout.path(path);
    let ts = model.waveforms.sample_interval();
    let replicas = thetas
        .iter()
        .map(|t| model.whitened_replica(path, t))
        .collect::<Result<Vec<_>, _>>()?;
    let delays: Vec<f64> = thetas.iter().map(|t| model.layout.delay(t, p) / ts).collect();
    Ok(GramMatrix::from_replicas(&replicas, &delays))
}

/// Solve the normal equations `Gram alpha = S^H r`.
pub fn alpha_mle_joint(gram: &GramMatrix, cross: &DVector<Complex64>) -> Result<DVector<Complex64>, LikelihoodError> {
    if gram.is_singular() {
        return Err(LikelihoodError::CoincidentDelays {
            gap_samples: gram.min_delay_gap,
            condition: gram.condition,
        });
    }
    let singular = || LikelihoodError::CoincidentDelays {
        gap_samples: gram.min_delay_gap,
        condition: gram.condition,
    };
    match gram.values.clone().cholesky() {
        Some(ch) => Ok(ch.solve(cross)),
        None => gram.values.clone().lu().solve(cross).ok_or_else(singular),
    }
}

/// `0.5 r^H S (S^H S)^{-1} S^H r` on one path.
pub fn joint_path_loglik(
    thetas: &[Position2D],
    r: &[Complex64],
    model: &ObservationModel,
    path: usize,
) -> Result<f64, LikelihoodError> {
    if thetas.is_empty() {
        return Err(LikelihoodError::NoTargets);
    }
    let p = model.layout.path(path);
    let ts = model.waveforms.sample_interval();
    let replicas = thetas
        .iter()
        .map(|t| model.whitened_replica(path, t))
        .collect::<Result<Vec<_>, _>>()?;
    let delays: Vec<f64> = thetas.iter().map(|t| model.layout.delay(t, p) / ts).collect();
    let gram = GramMatrix::from_replicas(&replicas, &delays);
    let cross = DVector::from_iterator(replicas.len(), replicas.iter().map(|s| s.dot(r)));
    let alpha = alpha_mle_joint(&gram, &cross)?;
    Ok(concentrated(&cross, &alpha))
}

/// `0.5 Re(c^H alpha)`, clamped at zero against rounding.
pub(crate) fn concentrated(cross: &DVector<Complex64>, alpha: &DVector<Complex64>) -> f64 {
    let v: Complex64 = cross.iter().zip(alpha.iter()).map(|(c, a)| c.conj() * a).sum();
    (0.5 * v.re).max(0.0)
}
