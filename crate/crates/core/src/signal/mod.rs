//! Waveforms, delayed replicas, echo synthesis, noise and whitening.

pub mod interp;
pub mod noise;
pub mod waveform;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::geometry::{AntennaLayout, PathId, Position2D, Scene};

pub use noise::{whitener_from_covariance, ClutterModel, NoiseModel, Whitener};
pub use waveform::{build_waveform_set, WaveformSet, ORTHOGONALITY_BOUND};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid waveform parameters: {0}")]
    InvalidWaveform(String),
    #[error("insufficient bandwidth-time product: {count} orthogonal waveforms do not fit in {pulse_samples} samples")]
    InsufficientBandwidthTime { count: usize, pulse_samples: usize },
    #[error("target outside observation window: delay {delay:e} s plus pulse exceeds window {window:e} s")]
    OutsideWindow { delay: f64, window: f64 },
    #[error("invalid noise covariance: {0}")]
    InvalidCovariance(String),
    #[error("dense covariance of {n} samples exceeds the supported maximum of {max}")]
    DenseTooLarge { n: usize, max: usize },
    #[error("observation already whitened")]
    AlreadyWhitened,
    #[error("observation length {got} does not match the {expected}-sample window")]
    LengthMismatch { got: usize, expected: usize },
}

/// Delayed replica `s_k(n Ts - tau)` stored over its nonzero span.
///
/// Samples outside `start .. start + values.len()` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub path: PathId,
    pub theta: Position2D,
    pub start: usize,
    pub values: Vec<Complex64>,
    pub n_samples: usize,
}

impl SteeringVector {
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_samples];
        out[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        out
    }

    /// `self^H x` for a full-length vector `x`.
    pub fn dot(&self, x: &[Complex64]) -> Complex64 {
        self.values
            .iter()
            .zip(&x[self.start..self.start + self.values.len()])
            .map(|(s, v)| s.conj() * v)
            .sum()
    }

    /// `self^H other`.
    pub fn inner(&self, other: &SteeringVector) -> Complex64 {
        let lo = self.start.max(other.start);
        let hi = (self.start + self.values.len()).min(other.start + other.values.len());
        (lo..hi)
            .map(|n| self.values[n - self.start].conj() * other.values[n - other.start])
            .sum()
    }
}

/// Replica of waveform `path.tx` delayed by the bistatic delay of `theta`.
pub fn steering_vector(
    waveforms: &WaveformSet,
    path: PathId,
    theta: &Position2D,
    layout: &AntennaLayout,
) -> Result<SteeringVector, SignalError> {
    let tau = layout.delay(theta, path);
    delayed_replica(waveforms, path, *theta, tau)
}

/// Replica for an explicit delay in seconds.
pub fn delayed_replica(
    waveforms: &WaveformSet,
    path: PathId,
    theta: Position2D,
    tau: f64,
) -> Result<SteeringVector, SignalError> {
    if !(tau >= 0.0) || tau + waveforms.tau_c() > waveforms.window() {
        return Err(SignalError::OutsideWindow {
            delay: tau,
            window: waveforms.window(),
        });
    }
    let n_samples = waveforms.n_samples();
    let (start, values) = interp::delay_sequence(waveforms.pulse(path.tx), tau / waveforms.sample_interval());
    let end = start + values.len() as i64;
    let lo = start.max(0);
    let hi = end.min(n_samples as i64);
    let values = values[(lo - start) as usize..(hi - start) as usize].to_vec();
    Ok(SteeringVector {
        path,
        theta,
        start: lo as usize,
        values,
        n_samples,
    })
}

/// Received samples on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathObservation {
    pub path: PathId,
    pub r: Vec<Complex64>,
    pub whitened: bool,
}

impl PathObservation {
    /// Wrap samples already expressed in unit-covariance coordinates.
    pub fn assume_whitened(path: PathId, r: Vec<Complex64>) -> Self {
        Self { path, r, whitened: true }
    }
}

/// `r = sum_g alpha_g s~_g + n + c` on one path.
pub fn synthesize_observation<R: Rng + ?Sized>(
    scene: &Scene,
    waveforms: &WaveformSet,
    noise: &NoiseModel,
    path_index: usize,
    rng: &mut R,
) -> Result<PathObservation, SignalError> {
    let path = scene.layout.path(path_index);
    let n = waveforms.n_samples();
    let mut r = if noise.sigma_sq(path_index) > 0.0 || noise.clutter().is_some_and(|c| c.power > 0.0) {
        noise.draw(path_index, n, rng)
    } else {
        vec![Complex64::new(0.0, 0.0); n]
    };
    for t in &scene.targets {
        let s = steering_vector(waveforms, path, &t.position, &scene.layout)?;
        let a = t.per_path_alpha[path_index];
        for (dst, v) in r[s.start..].iter_mut().zip(&s.values) {
            *dst += a * v;
        }
    }
    Ok(PathObservation { path, r, whitened: false })
}

pub fn whiten(obs: &PathObservation, whitener: &Whitener) -> Result<PathObservation, SignalError> {
    if obs.whitened {
        return Err(SignalError::AlreadyWhitened);
    }
    if let Whitener::Dense(w) = whitener {
        if w.ncols() != obs.r.len() {
            return Err(SignalError::LengthMismatch {
                got: obs.r.len(),
                expected: w.ncols(),
            });
        }
    }
    Ok(PathObservation {
        path: obs.path,
        r: whitener.apply(&obs.r),
        whitened: true,
    })
}

/// Post-whitening replica energy `s~^H R^{-1} s~`.
pub fn whitened_energy(s: &SteeringVector, whitener: &Whitener) -> f64 {
    match whitener {
        Whitener::Scalar { inv_sigma } => s.energy() * inv_sigma * inv_sigma,
        Whitener::Dense(_) => whitener.apply(&s.to_dense()).iter().map(|v| v.norm_sqr()).sum(),
    }
}

/// Set per-path reflection coefficients for a target SNR.
///
/// On every path the strongest target's post-whitening matched-filter SNR
/// equals `10^(snr_db/10)`; other targets keep their `amplitude_sq` ratio to
/// it. Phases are drawn uniformly, target-major then path order.
pub fn scale_alphas_for_snr<R: Rng + ?Sized>(
    scene: &Scene,
    waveforms: &WaveformSet,
    whiteners: &[Whitener],
    snr_db: f64,
    rng: &mut R,
) -> Result<Scene, SignalError> {
    let mut out = scene.clone();
    let Some(reference) = strongest_target(scene) else {
        return Ok(out);
    };
    let snr = 10f64.powf(snr_db / 10.0);
    let ref_pos = scene.targets[reference].position;
    let p_ref = scene.targets[reference].amplitude_sq;
    let mut ref_power = Vec::with_capacity(scene.layout.path_count());
    for (i, path) in scene.layout.paths().enumerate() {
        let s = steering_vector(waveforms, path, &ref_pos, &scene.layout)?;
        ref_power.push(snr / whitened_energy(&s, &whiteners[i]));
    }
    for t in &mut out.targets {
        let ratio = t.amplitude_sq / p_ref;
        for (a, p) in t.per_path_alpha.iter_mut().zip(&ref_power) {
            let phase: f64 = rng.random::<f64>() * TAU;
            *a = Complex64::from_polar((ratio * p).sqrt(), phase);
        }
    }
    Ok(out)
}

/// Index of the first target with the largest relative amplitude.
pub fn strongest_target(scene: &Scene) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, t) in scene.targets.iter().enumerate() {
        if best.is_none_or(|b| t.amplitude_sq > scene.targets[b].amplitude_sq) {
            best = Some(i);
        }
    }
    best
}
