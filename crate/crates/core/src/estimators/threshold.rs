use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EstimatorError;

pub const MIN_CALIBRATION_TRIALS: usize = 100;

/// Detection threshold for the full-path objective plus SIC path weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub lambda_prime: f64,
    pub pfa: f64,
    pub path_weights: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Number of targets in the tuple statistic that was calibrated (1 for SSR/SIC).
    #[serde(default = "one")]
    pub tuple_size: usize,
}

fn one() -> usize {
    1
}

impl ThresholdConfig {
    /// Unit path weights.
    pub fn fixed(lambda_prime: f64, paths: usize) -> Self {
        Self {
            lambda_prime,
            pfa: f64::NAN,
            path_weights: vec![1.0; paths],
            trials: 0,
            seed: 0,
            tuple_size: 1,
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.path_weights.iter().sum()
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.path_weights.iter().any(|w| !(*w >= 0.0)) || !(self.weight_sum() > 0.0) {
            return Err(EstimatorError::BadWeights);
        }
        if !(self.lambda_prime >= 0.0) {
            return Err(EstimatorError::ThresholdFile(format!(
                "lambda_prime {} must be nonnegative",
                self.lambda_prime
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("threshold config serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self, EstimatorError> {
        let t: Self = toml::from_str(text).map_err(|e| EstimatorError::ThresholdFile(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), EstimatorError> {
        std::fs::write(path, self.to_toml())
            .map_err(|e| EstimatorError::ThresholdFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EstimatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EstimatorError::ThresholdFile(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Empirical `(1 - pfa)` quantile: the value a fraction `pfa` of the
/// samples exceeds.
pub fn empirical_threshold(peaks: &[f64], pfa: f64) -> Result<f64, EstimatorError> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(EstimatorError::InvalidPfa(pfa));
    }
    if peaks.is_empty() {
        return Err(EstimatorError::TooFewTrials { got: 0, min: 1 });
    }
    let mut sorted = peaks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let idx = (((1.0 - pfa) * n as f64).floor() as usize).min(n - 1);
    Ok(sorted[idx])
}

/// Threshold from the peak statistic of noise-only trials.
pub fn calibrate_threshold(
    peaks: &[f64],
    pfa: f64,
    paths: usize,
    seed: u64,
) -> Result<ThresholdConfig, EstimatorError> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(EstimatorError::InvalidPfa(pfa));
    }
    if peaks.len() < MIN_CALIBRATION_TRIALS {
        return Err(EstimatorError::TooFewTrials {
            got: peaks.len(),
            min: MIN_CALIBRATION_TRIALS,
        });
    }
    Ok(ThresholdConfig {
        lambda_prime: empirical_threshold(peaks, pfa)?,
        pfa,
        path_weights: vec![1.0; paths],
        trials: peaks.len(),
        seed,
        tuple_size: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_endpoints() {
        let peaks: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(empirical_threshold(&peaks, 1.0 - 1e-12).unwrap(), 1.0);
        assert_eq!(empirical_threshold(&peaks, 0.1).unwrap(), 91.0);
        // exactly 10 of 100 exceed it
        assert_eq!(peaks.iter().filter(|&&p| p > 91.0).count(), 9);
        assert_eq!(peaks.iter().filter(|&&p| p >= 91.0).count(), 10);
        assert_eq!(empirical_threshold(&peaks, 1e-9).unwrap(), 100.0);
    }

    #[test]
    fn pfa_must_be_open_interval() {
        assert!(matches!(empirical_threshold(&[1.0], 0.0), Err(EstimatorError::InvalidPfa(_))));
        assert!(matches!(empirical_threshold(&[1.0], 1.0), Err(EstimatorError::InvalidPfa(_))));
        assert!(matches!(calibrate_threshold(&[1.0; 200], 1.5, 4, 0), Err(EstimatorError::InvalidPfa(_))));
    }

    #[test]
    fn calibration_needs_enough_trials() {
        assert!(matches!(
            calibrate_threshold(&[1.0; 99], 0.1, 4, 0),
            Err(EstimatorError::TooFewTrials { got: 99, .. })
        ));
        let t = calibrate_threshold(&[2.0; 100], 0.1, 4, 7).unwrap();
        assert_eq!(t.path_weights, vec![1.0; 4]);
        assert_eq!(t.seed, 7);
    }

    #[test]
    fn toml_round_trip() {
        let t = calibrate_threshold(&(0..150).map(|i| i as f64 * 0.37).collect::<Vec<_>>(), 0.1, 3, 9).unwrap();
        assert_eq!(ThresholdConfig::from_toml(&t.to_toml()).unwrap(), t);
        assert!(ThresholdConfig::from_toml("lambda_prime = 1.0\nbogus = 2\n").is_err());
    }
}
