use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{bin_index, FootprintMask};
use crate::signal::interp::{self, FIRST_TAP, TAPS};
use crate::signal::{steering_vector, PathObservation, Whitener};

use super::{Grid, LikelihoodError, ObservationModel};

/// Per (path, cell) quantities that do not depend on the observation.
#[derive(Debug, Clone, Copy)]
struct CellEntry {
    /// First sample of the interpolated replica: integer delay plus `FIRST_TAP`.
    start: i32,
    /// Range-bin index of the cell centre.
    bin: i32,
    /// Fractional delay in samples.
    mu: f64,
    /// Whitened replica energy; zero marks a replica outside the window.
    norm: f64,
}

/// Precomputed geometry and replica energies for fast evaluation of the
/// objective over a fixed grid.
///
/// The matched-filter outputs for every delay on a path come from one FFT
/// cross-correlation of the whitened observation with the transmitted pulse;
/// each cell then needs only the interpolation taps at its fractional delay.
pub struct FieldPlan {
    grid: Grid,
    n_paths: usize,
    tx_of_path: Vec<usize>,
    entries: Vec<CellEntry>,
    fft_len: usize,
    pulse_spectra: Vec<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    whiteners: Vec<Whitener>,
    n_samples: usize,
    sample_interval: f64,
    degenerate_cells: usize,
}

impl std::fmt::Debug for FieldPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldPlan")
            .field("grid", &self.grid)
            .field("n_paths", &self.n_paths)
            .field("fft_len", &self.fft_len)
            .field("degenerate_cells", &self.degenerate_cells)
            .finish_non_exhaustive()
    }
}

impl FieldPlan {
    pub fn new(model: &ObservationModel, grid: &Grid) -> Result<Self, LikelihoodError> {
        let w = &model.waveforms;
        let n_samples = w.n_samples();
        let ts = w.sample_interval();
        let tau_c = w.tau_c();
        let n_cells = grid.cell_count();
        let n_paths = model.path_count();
        let pulse_len = w.pulse_samples();

        let fft_len = (n_samples + pulse_len + TAPS + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let pulse_spectra: Vec<Vec<Complex64>> = (0..w.count())
            .map(|k| {
                let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
                buf[..pulse_len].copy_from_slice(w.pulse(k));
                forward.process(&mut buf);
                buf.iter_mut().for_each(|v| *v = v.conj());
                buf
            })
            .collect();
        let acfs: Vec<Vec<Complex64>> = (0..w.count()).map(|k| w.autocorrelation(k)).collect();
        let centers: Vec<_> = (0..n_cells).map(|c| grid.center(c)).collect();

        let per_path: Vec<Vec<CellEntry>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let path = model.layout.path(p);
                let whitener = &model.whiteners[p];
                let rinv = match whitener {
                    Whitener::Dense(m) => Some(m * m),
                    Whitener::Scalar { .. } => None,
                };
                let acf = &acfs[path.tx];
                centers
                    .iter()
                    .map(|theta| {
                        let tau = model.layout.delay(theta, path);
                        let bin = bin_index(tau, tau_c) as i32;
                        let (d, mu) = interp::split_delay(tau / ts);
                        let start = d + FIRST_TAP as i64;
                        let in_window = tau + tau_c <= w.window();
                        let full = start >= 0 && start as usize + pulse_len + TAPS - 1 <= n_samples;
                        let norm = if !in_window {
                            0.0
                        } else if let Whitener::Scalar { inv_sigma } = whitener {
                            let e = if full {
                                acf_energy(&interp::taps(mu), acf, pulse_len)
                            } else {
                                steering_vector(w, path, theta, &model.layout).map(|s| s.energy()).unwrap_or(0.0)
                            };
                            e * inv_sigma * inv_sigma
                        } else {
                            let s = steering_vector(w, path, theta, &model.layout).expect("in-window replica");
                            quadratic_form(rinv.as_ref().unwrap(), &s)
                        };
                        CellEntry { start: start as i32, bin, mu, norm }
                    })
                    .collect()
            })
            .collect();
        let entries: Vec<CellEntry> = per_path.into_iter().flatten().collect();
        let degenerate_cells = entries.iter().filter(|e| !(e.norm > 0.0)).count();

        Ok(Self {
            grid: grid.clone(),
            n_paths,
            tx_of_path: model.layout.paths().map(|p| p.tx).collect(),
            entries,
            fft_len,
            pulse_spectra,
            forward,
            inverse,
            whiteners: model.whiteners.clone(),
            n_samples,
            sample_interval: ts,
            degenerate_cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn path_count(&self) -> usize {
        self.n_paths
    }

    /// Number of (path, cell) pairs whose replica falls outside the window.
    pub fn degenerate_cells(&self) -> usize {
        self.degenerate_cells
    }

    fn entry(&self, path: usize, cell: usize) -> &CellEntry {
        &self.entries[path * self.grid.cell_count() + cell]
    }

    /// Whitened replica energy of cell `cell` on `path`.
    pub fn norm(&self, path: usize, cell: usize) -> f64 {
        self.entry(path, cell).norm
    }

    /// Delay of the cell centre on `path`, in samples.
    pub fn delay_samples(&self, path: usize, cell: usize) -> f64 {
        let e = self.entry(path, cell);
        (e.start as i64 - FIRST_TAP as i64) as f64 + e.mu
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn bin(&self, path: usize, cell: usize) -> i64 {
        self.entry(path, cell).bin as i64
    }

    /// Range-bin footprint of the centre of `cell`, from cached bin indices.
    pub fn footprint(&self, cell: usize) -> FootprintMask {
        let n_cells = self.grid.cell_count();
        let mut union = vec![false; n_cells];
        let per_path = (0..self.n_paths)
            .map(|p| {
                let hat = self.bin(p, cell);
                let row = &self.entries[p * n_cells..(p + 1) * n_cells];
                let mask: Vec<bool> = row.iter().map(|e| (e.bin as i64 - hat).abs() <= 1).collect();
                for (u, m) in union.iter_mut().zip(&mask) {
                    *u |= *m;
                }
                mask
            })
            .collect();
        FootprintMask { per_path, union }
    }

    /// Evaluate every cell on every path for one set of whitened observations.
    pub fn evaluate(&self, observations: &[PathObservation]) -> Result<ObjectiveField, LikelihoodError> {
        if observations.len() != self.n_paths {
            return Err(LikelihoodError::ObservationCount {
                expected: self.n_paths,
                got: observations.len(),
            });
        }
        for (p, o) in observations.iter().enumerate() {
            if !o.whitened {
                return Err(LikelihoodError::NotWhitened { path: p });
            }
            if o.r.len() != self.n_samples {
                return Err(crate::signal::SignalError::LengthMismatch {
                    got: o.r.len(),
                    expected: self.n_samples,
                }
                .into());
            }
        }
        let n_cells = self.grid.cell_count();
        let per_path: Vec<(Vec<f64>, Vec<Complex64>)> = observations
            .par_iter()
            .enumerate()
            .map(|(p, obs)| self.evaluate_path(p, &obs.r))
            .collect();

        let mut ll = Vec::with_capacity(self.n_paths * n_cells);
        let mut alpha = Vec::with_capacity(self.n_paths * n_cells);
        for (l, a) in per_path {
            ll.extend(l);
            alpha.extend(a);
        }
        Ok(ObjectiveField::from_parts(self.grid.clone(), self.n_paths, ll, alpha))
    }

    fn evaluate_path(&self, p: usize, r: &[Complex64]) -> (Vec<f64>, Vec<Complex64>) {
        let l = self.fft_len;
        // q = W^H r_w, so that s~^H q = (W s~)^H r_w
        let q = self.whiteners[p].apply(r);
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        buf[..q.len()].copy_from_slice(&q);
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.pulse_spectra[self.tx_of_path[p]]) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / l as f64;

        let n_cells = self.grid.cell_count();
        let row = &self.entries[p * n_cells..(p + 1) * n_cells];
        let mut ll = Vec::with_capacity(n_cells);
        let mut alpha = Vec::with_capacity(n_cells);
        for e in row {
            if !(e.norm > 0.0) {
                ll.push(0.0);
                alpha.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let h = interp::taps(e.mu);
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, ht) in h.iter().enumerate() {
                let m = (e.start as i64 + t as i64).rem_euclid(l as i64) as usize;
                acc += buf[m] * *ht;
            }
            acc *= scale;
            ll.push(0.5 * acc.norm_sqr() / e.norm);
            alpha.push(acc / e.norm);
        }
        (ll, alpha)
    }
}

/// `sum_{a,b} h_a h_b acf[a - b]` with `acf` indexed from lag `-(len-1)`.
fn acf_energy(h: &interp::Taps, acf: &[Complex64], pulse_len: usize) -> f64 {
    let off = pulse_len as isize - 1;
    let mut e = 0.0;
    for a in 0..TAPS {
        for b in 0..TAPS {
            let d = a as isize - b as isize;
            if d.abs() <= off {
                e += h[a] * h[b] * acf[(d + off) as usize].re;
            }
        }
    }
    e
}

/// `s^H M s` over the nonzero span of `s`.
fn quadratic_form(m: &nalgebra::DMatrix<Complex64>, s: &crate::signal::SteeringVector) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, a) in s.values.iter().enumerate() {
        let row: Complex64 = s
            .values
            .iter()
            .enumerate()
            .map(|(j, b)| m[(s.start + i, s.start + j)] * b)
            .sum();
        acc += a.conj() * row;
    }
    acc.re
}

/// Per-cell, per-path log-likelihood cache and the current summed objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveField {
    grid: Grid,
    n_paths: usize,
    /// `ll[path * cells + cell]`
    ll: Vec<f64>,
    /// Single-target coefficient estimate `s^H r / s^H s`, same layout as `ll`.
    alpha: Vec<Complex64>,
    cancelled: Vec<bool>,
    combined: Vec<f64>,
}

impl ObjectiveField {
    /// Build from per-path values laid out path-major. `alpha` may be empty.
    pub fn from_parts(grid: Grid, n_paths: usize, ll: Vec<f64>, alpha: Vec<Complex64>) -> Self {
        let n_cells = grid.cell_count();
        assert_eq!(ll.len(), n_paths * n_cells, "per-path values do not match grid");
        let alpha = if alpha.is_empty() {
            vec![Complex64::new(0.0, 0.0); ll.len()]
        } else {
            alpha
        };
        let mut combined = vec![0.0; n_cells];
        for p in 0..n_paths {
            for (c, v) in combined.iter_mut().zip(&ll[p * n_cells..(p + 1) * n_cells]) {
                *c += v;
            }
        }
        Self {
            grid,
            n_paths,
            cancelled: vec![false; ll.len()],
            ll,
            alpha,
            combined,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn path_count(&self) -> usize {
        self.n_paths
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    pub fn ll(&self, path: usize, cell: usize) -> f64 {
        self.ll[path * self.cell_count() + cell]
    }

    pub fn path_values(&self, path: usize) -> &[f64] {
        let n = self.cell_count();
        &self.ll[path * n..(path + 1) * n]
    }

    pub fn alpha_hat(&self, path: usize, cell: usize) -> Complex64 {
        self.alpha[path * self.cell_count() + cell]
    }

    pub fn combined(&self) -> &[f64] {
        &self.combined
    }

    pub fn is_cancelled(&self, path: usize, cell: usize) -> bool {
        self.cancelled[path * self.cell_count() + cell]
    }

    /// Number of paths already subtracted at `cell`.
    pub fn cancelled_paths(&self, cell: usize) -> usize {
        (0..self.n_paths).filter(|&p| self.is_cancelled(p, cell)).count()
    }

    /// Subtract `ll` wherever `mask[path][cell]` is set and the pair has not
    /// been subtracted before. Returns the newly cancelled `(path, cell)` pairs.
    pub fn cancel(&mut self, mask: &[Vec<bool>]) -> Vec<(usize, usize)> {
        let n = self.cell_count();
        let mut fresh = Vec::new();
        let mut touched = vec![false; n];
        for (p, row) in mask.iter().enumerate() {
            for (c, &m) in row.iter().enumerate() {
                let i = p * n + c;
                if m && !self.cancelled[i] {
                    self.cancelled[i] = true;
                    touched[c] = true;
                    fresh.push((p, c));
                }
            }
        }
        for (c, t) in touched.iter().enumerate() {
            if *t {
                self.combined[c] = (0..self.n_paths)
                    .filter(|&p| !self.cancelled[p * n + c])
                    .map(|p| self.ll[p * n + c])
                    .sum();
            }
        }
        fresh
    }

    /// Row-major-first index of the largest combined value among allowed cells.
    pub fn argmax(&self, allowed: Option<&[bool]>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, &v) in self.combined.iter().enumerate() {
            if allowed.is_some_and(|a| !a[c]) {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((c, v));
            }
        }
        best.map(|(c, _)| c)
    }
}

/// Build a plan and evaluate it once.
pub fn objective_field(
    observations: &[PathObservation],
    model: &ObservationModel,
    grid: &Grid,
) -> Result<ObjectiveField, LikelihoodError> {
    FieldPlan::new(model, grid)?.evaluate(observations)
}
