use std::f64::consts::PI;

use num_complex::Complex64;

use super::SignalError;

/// Largest normalized cross-correlation magnitude tolerated between distinct waveforms.
pub const ORTHOGONALITY_BOUND: f64 = 0.05;

/// Sampled lowpass-equivalent transmit waveforms, one per transmitter.
///
/// Waveform `k` is a rectangular pulse of `pulse_samples` samples carrying a
/// tone at `offsets[k] / pulse_samples` cycles per sample, so the pulse
/// contains an integer number of cycles and distinct tones are orthogonal at
/// zero lag.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    pulses: Vec<Vec<Complex64>>,
    offsets: Vec<i64>,
    window: f64,
    sample_interval: f64,
    n_samples: usize,
    tau_c: f64,
    orth_bound: f64,
}

impl WaveformSet {
    pub fn count(&self) -> usize {
        self.pulses.len()
    }

    /// Nonzero head of waveform `k` (samples `0..pulse_samples`).
    pub fn pulse(&self, k: usize) -> &[Complex64] {
        &self.pulses[k]
    }

    /// Waveform `k` over the whole observation window (length `N_T`).
    pub fn samples(&self, k: usize) -> Vec<Complex64> {
        let mut s = vec![Complex64::new(0.0, 0.0); self.n_samples];
        let p = &self.pulses[k];
        let n = p.len().min(self.n_samples);
        s[..n].copy_from_slice(&p[..n]);
        s
    }

    pub fn energy(&self, k: usize) -> f64 {
        self.pulses[k].iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frequency_offsets(&self) -> &[i64] {
        &self.offsets
    }

    /// Observation window T, seconds.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Ts = T / (N_T - 1).
    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    /// N_T.
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn pulse_samples(&self) -> usize {
        self.pulses[0].len()
    }

    /// Effective correlation duration, seconds.
    pub fn tau_c(&self) -> f64 {
        self.tau_c
    }

    pub fn orth_bound(&self) -> f64 {
        self.orth_bound
    }

    /// Autocorrelation `acf[d] = sum_u conj(s[u]) s[u + d]` of waveform `k`
    /// for `d` in `-(P-1) ..= P-1`; index `d + P - 1`.
    pub fn autocorrelation(&self, k: usize) -> Vec<Complex64> {
        lagged_correlation(&self.pulses[k], &self.pulses[k])
    }
}

/// `out[d + a.len() - 1] = sum_u conj(a[u]) b[u + d]` for all lags with overlap.
pub(crate) fn lagged_correlation(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let na = a.len() as isize;
    let nb = b.len() as isize;
    let mut out = Vec::with_capacity((na + nb - 1) as usize);
    for d in -(na - 1)..nb {
        let mut acc = Complex64::new(0.0, 0.0);
        let lo = 0.max(-d);
        let hi = na.min(nb - d);
        for u in lo..hi {
            acc += a[u as usize].conj() * b[(u + d) as usize];
        }
        out.push(acc);
    }
    out
}

fn tone_pulse(offset: i64, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * offset as f64 * n as f64 / len as f64))
        .collect()
}

/// Worst normalized cross-correlation over all distinct pairs and integer lags.
pub fn measure_orth_bound(pulses: &[Vec<Complex64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..pulses.len() {
        for j in (i + 1)..pulses.len() {
            let ei: f64 = pulses[i].iter().map(|v| v.norm_sqr()).sum();
            let ej: f64 = pulses[j].iter().map(|v| v.norm_sqr()).sum();
            let norm = (ei * ej).sqrt();
            let peak = lagged_correlation(&pulses[i], &pulses[j])
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            worst = worst.max(peak / norm);
        }
    }
    worst
}

/// Build `count` frequency-division orthogonal rectangular pulses.
///
/// The tone spacing is the smallest integer number of cycles per pulse for
/// which every pair stays below [`ORTHOGONALITY_BOUND`] at every lag.
pub fn build_waveform_set(
    count: usize,
    window: f64,
    n_samples: usize,
    pulse_width: f64,
) -> Result<WaveformSet, SignalError> {
    if count == 0 {
        return Err(SignalError::InvalidWaveform("need at least one waveform".into()));
    }
    if n_samples < 2 {
        return Err(SignalError::InvalidWaveform("N_T must be at least 2".into()));
    }
    if !(window > 0.0) || !(pulse_width > 0.0) || pulse_width > window {
        return Err(SignalError::InvalidWaveform(format!(
            "pulse width {pulse_width} s must be positive and no longer than the window {window} s"
        )));
    }
    let ts = window / (n_samples - 1) as f64;
    let pulse_samples = ((pulse_width / ts).round() as usize).max(1);

    let (offsets, orth_bound) = if count == 1 {
        (vec![0], 0.0)
    } else {
        let mut found = None;
        let mut spacing = 1i64;
        while (count as i64 - 1) * spacing < pulse_samples as i64 {
            let offsets: Vec<i64> = (0..count as i64)
                .map(|k| k * spacing - (count as i64 - 1) * spacing / 2)
                .collect();
            let pulses: Vec<_> = offsets.iter().map(|&m| tone_pulse(m, pulse_samples)).collect();
            let bound = measure_orth_bound(&pulses);
            if bound <= ORTHOGONALITY_BOUND {
                found = Some((offsets, bound));
                break;
            }
            spacing += 1;
        }
        found.ok_or(SignalError::InsufficientBandwidthTime {
            count,
            pulse_samples,
        })?
    };

    let pulses = offsets.iter().map(|&m| tone_pulse(m, pulse_samples)).collect();
    Ok(WaveformSet {
        pulses,
        offsets,
        window,
        sample_interval: ts,
        n_samples,
        tau_c: pulse_width,
        orth_bound,
    })
}
