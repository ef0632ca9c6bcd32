//! Band-limited fractional-delay interpolation.
//!
//! A Kaiser-windowed sinc is tabulated over `PHASES` fractional positions and
//! linearly interpolated between neighbouring phases. A sample delayed by
//! `D + mu` samples (`D` integer, `0 <= mu < 1`) is
//!
//! ```text
//! y[n] = sum_j h_j(mu) * x[n - D - j],   j = FIRST_TAP ..= FIRST_TAP + TAPS - 1
//! ```
//!
//! with `h_j(mu) = sinc(j - mu) * w(j - mu)`.

use std::sync::OnceLock;

pub const TAPS: usize = 16;
/// Offset of the first tap relative to the integer delay.
pub const FIRST_TAP: isize = -(TAPS as isize / 2 - 1);
const HALF_WIDTH: f64 = (TAPS / 2) as f64;
const KAISER_BETA: f64 = 8.0;
const PHASES: usize = 1024;

pub type Taps = [f64; TAPS];

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn kernel(x: f64) -> f64 {
    let r = x / HALF_WIDTH;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let w = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA);
    sinc(x) * w
}

/// Exact (untabulated) taps for a fractional delay `mu`.
pub fn exact_taps(mu: f64) -> Taps {
    let mut h = [0.0; TAPS];
    for (i, v) in h.iter_mut().enumerate() {
        let j = FIRST_TAP + i as isize;
        *v = kernel(j as f64 - mu);
    }
    h
}

fn table() -> &'static [Taps] {
    static TABLE: OnceLock<Vec<Taps>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=PHASES)
            .map(|p| exact_taps(p as f64 / PHASES as f64))
            .collect()
    })
}

/// Interpolation taps for fractional delay `mu` in `[0, 1)`.
pub fn taps(mu: f64) -> Taps {
    debug_assert!((0.0..1.0).contains(&mu), "fractional delay {mu} out of range");
    if mu == 0.0 {
        return table()[0];
    }
    let t = table();
    let pos = mu * PHASES as f64;
    let i = (pos.floor() as usize).min(PHASES - 1);
    let f = pos - i as f64;
    let (a, b) = (&t[i], &t[i + 1]);
    let mut h = [0.0; TAPS];
    for k in 0..TAPS {
        h[k] = a[k] + f * (b[k] - a[k]);
    }
    h
}

/// Split a delay measured in samples into integer and fractional parts.
pub fn split_delay(samples: f64) -> (i64, f64) {
    let d = samples.floor();
    let mu = samples - d;
    // guard against mu rounding up to exactly 1
    if mu >= 1.0 {
        (d as i64 + 1, 0.0)
    } else {
        (d as i64, mu)
    }
}

/// Delay a finite sequence `x` (taken as zero outside its support) by
/// `delay_samples`. Returns `(start, values)` such that output sample
/// `start + i` equals `values[i]`; samples outside that span are zero.
pub fn delay_sequence(x: &[num_complex::Complex64], delay_samples: f64) -> (i64, Vec<num_complex::Complex64>) {
    let (d, mu) = split_delay(delay_samples);
    let h = taps(mu);
    let start = d + FIRST_TAP as i64;
    let len = x.len() + TAPS - 1;
    let mut out = vec![num_complex::Complex64::new(0.0, 0.0); len];
    // y[start + i] = sum_t h[t] x[start + i - d - (FIRST_TAP + t)] = sum_t h[t] x[i - t]
    for (i, y) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(x.len() - 1);
        let hi = i.min(TAPS - 1);
        for t in lo..=hi {
            *y += x[i - t] * h[t];
        }
    }
    (start, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_delay_is_identity_kernel() {
        let h = taps(0.0);
        for (i, v) in h.iter().enumerate() {
            let j = FIRST_TAP + i as isize;
            assert_eq!(*v, if j == 0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn table_matches_exact_kernel() {
        for mu in [0.013, 0.25, 0.5, 0.731, 0.9999] {
            let a = taps(mu);
            let b = exact_taps(mu);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-6, "mu={mu}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn half_sample_kernel_is_symmetric() {
        let h = exact_taps(0.5);
        for i in 0..TAPS {
            assert_relative_eq!(h[i], h[TAPS - 1 - i], epsilon = 1e-15);
        }
    }

    #[test]
    fn bessel_reference_values() {
        assert_relative_eq!(bessel_i0(0.0), 1.0);
        assert_relative_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i0(8.0), 427.564_115_721_804_74, max_relative = 1e-13);
    }

    #[test]
    fn split_delay_parts() {
        assert_eq!(split_delay(7.0), (7, 0.0));
        let (d, mu) = split_delay(7.25);
        assert_eq!(d, 7);
        assert_relative_eq!(mu, 0.25);
        let (d, mu) = split_delay(-0.5);
        assert_eq!(d, -1);
        assert_relative_eq!(mu, 0.5);
    }
}
