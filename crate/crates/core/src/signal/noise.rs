use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SignalError;

/// Largest window for which a dense clutter covariance is materialised.
pub const MAX_DENSE_SAMPLES: usize = 2048;

/// Exponentially correlated clutter: `C[i][j] = power * rho^|i-j|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterModel {
    pub power: f64,
    pub rho: f64,
}

impl ClutterModel {
    fn validate(&self) -> Result<(), SignalError> {
        if !(self.power >= 0.0) || !self.power.is_finite() {
            return Err(SignalError::InvalidCovariance(format!(
                "clutter power {} must be finite and nonnegative",
                self.power
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(SignalError::InvalidCovariance(format!(
                "clutter correlation {} must lie in (-1, 1)",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Thermal noise power per path plus an optional clutter model shared by all paths.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma_sq: Vec<f64>,
    clutter: Option<ClutterModel>,
}

impl NoiseModel {
    pub fn new(sigma_sq: Vec<f64>, clutter: Option<ClutterModel>) -> Result<Self, SignalError> {
        if let Some(c) = &clutter {
            c.validate()?;
        }
        if sigma_sq.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(SignalError::InvalidCovariance(
                "thermal noise power must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { sigma_sq, clutter })
    }

    /// Same white noise power on every path, no clutter.
    pub fn white(paths: usize, sigma_sq: f64) -> Result<Self, SignalError> {
        Self::new(vec![sigma_sq; paths], None)
    }

    pub fn sigma_sq(&self, path: usize) -> f64 {
        self.sigma_sq[path]
    }

    pub fn clutter(&self) -> Option<&ClutterModel> {
        self.clutter.as_ref()
    }

    pub fn path_count(&self) -> usize {
        self.sigma_sq.len()
    }

    fn has_clutter(&self) -> bool {
        self.clutter.is_some_and(|c| c.power > 0.0)
    }

    /// Dense `R = sigma^2 I + C` for one path. Refuses windows above [`MAX_DENSE_SAMPLES`].
    pub fn covariance(&self, path: usize, n: usize) -> Result<DMatrix<Complex64>, SignalError> {
        if n > MAX_DENSE_SAMPLES {
            return Err(SignalError::DenseTooLarge { n, max: MAX_DENSE_SAMPLES });
        }
        let s2 = self.sigma_sq[path];
        let c = self.clutter.unwrap_or(ClutterModel { power: 0.0, rho: 0.0 });
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let lag = i.abs_diff(j) as i32;
            let v = c.power * c.rho.powi(lag) + if i == j { s2 } else { 0.0 };
            Complex64::new(v, 0.0)
        }))
    }

    /// Whitening operator for one path.
    pub fn whitener(&self, path: usize, n: usize) -> Result<Whitener, SignalError> {
        if self.has_clutter() {
            whitener_from_covariance(&self.covariance(path, n)?)
        } else {
            let s2 = self.sigma_sq[path];
            if !(s2 > 0.0) {
                return Err(SignalError::InvalidCovariance(format!(
                    "path {path}: covariance {s2} * I is not positive definite"
                )));
            }
            Ok(Whitener::Scalar { inv_sigma: 1.0 / s2.sqrt() })
        }
    }

    /// Draw `n` samples of thermal noise plus clutter for one path.
    pub fn draw<R: Rng + ?Sized>(&self, path: usize, n: usize, rng: &mut R) -> Vec<Complex64> {
        let s = (self.sigma_sq[path] / 2.0).sqrt();
        let mut out: Vec<Complex64> = (0..n).map(|_| complex_normal(rng) * s).collect();
        if let Some(c) = self.clutter.filter(|c| c.power > 0.0) {
            // stationary AR(1) has covariance power * rho^|i-j|
            let a = (c.power / 2.0).sqrt();
            let innov = (1.0 - c.rho * c.rho).sqrt();
            let mut state = complex_normal(rng) * a;
            for (i, v) in out.iter_mut().enumerate() {
                if i > 0 {
                    state = state * c.rho + complex_normal(rng) * (a * innov);
                }
                *v += state;
            }
        }
        out
    }
}

/// Unit-variance circular complex Gaussian scaled by sqrt(2), i.e. re, im ~ N(0, 1).
fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `R^{-1/2}` in the cheapest exact form available.
#[derive(Debug, Clone, PartialEq)]
pub enum Whitener {
    Scalar { inv_sigma: f64 },
    Dense(DMatrix<Complex64>),
}

impl Whitener {
    pub fn identity() -> Self {
        Whitener::Scalar { inv_sigma: 1.0 }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match self {
            Whitener::Scalar { inv_sigma } => x.iter().map(|v| v * *inv_sigma).collect(),
            Whitener::Dense(w) => {
                assert_eq!(w.ncols(), x.len(), "whitener dimension mismatch");
                let v = nalgebra::DVector::from_column_slice(x);
                (w * v).iter().copied().collect()
            }
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Whitener::Scalar { .. })
    }
}

/// Hermitian inverse square root of a covariance via its eigendecomposition.
pub fn whitener_from_covariance(r: &DMatrix<Complex64>) -> Result<Whitener, SignalError> {
    if !r.is_square() || r.nrows() == 0 {
        return Err(SignalError::InvalidCovariance("covariance must be square and nonempty".into()));
    }
    let scale = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let asym = (r - r.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) || asym > 1e-10 * scale {
        return Err(SignalError::InvalidCovariance("covariance is not Hermitian".into()));
    }
    let eig = r.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmin > 1e-12 * lmax) {
        return Err(SignalError::InvalidCovariance(format!(
            "covariance is not positive definite (smallest eigenvalue {lmin:e})"
        )));
    }
    let u = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(
        &eig.eigenvalues.map(|l| Complex64::new(1.0 / l.sqrt(), 0.0)),
    );
    Ok(Whitener::Dense(u * d * u.adjoint()))
}
