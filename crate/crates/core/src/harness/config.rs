//! Scenario files: TOML with unknown keys rejected. Coordinates in metres.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::estimators::Algorithm;
use crate::geometry::{AntennaLayout, Position2D, Region};
use crate::signal::ClutterModel;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub layout: LayoutConfig,
    pub region: RegionConfig,
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
    pub waveform: WaveformConfig,
    pub noise: NoiseConfig,
    pub detection: DetectionConfig,
    pub experiment: ExperimentConfig,
}

/// Either `transceivers` (co-located transmit/receive sites) or both `tx` and `rx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub transceivers: Option<Vec<[f64; 2]>>,
    pub tx: Option<Vec<[f64; 2]>>,
    pub rx: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub x: f64,
    pub y: f64,
    /// Relative square modulus of the reflection coefficient.
    #[serde(default = "unit")]
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    /// Observation window T, seconds.
    pub window: f64,
    /// N_T.
    pub samples: usize,
    pub pulse_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "unit")]
    pub sigma_sq: f64,
    pub clutter: Option<ClutterModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_g_max")]
    pub g_max: usize,
    pub pfa: f64,
    #[serde(default = "default_calibration_trials")]
    pub calibration_trials: usize,
    #[serde(default = "yes")]
    pub early_stop: bool,
    /// Per-path SIC threshold weights; unit weights when absent.
    pub path_weights: Option<Vec<f64>>,
    /// Reuse a stored threshold instead of calibrating.
    pub threshold_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub single_target_benchmark: bool,
    pub output_dir: Option<PathBuf>,
}

fn unit() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_g_max() -> usize {
    5
}
fn default_calibration_trials() -> usize {
    1000
}

fn positions(list: &[[f64; 2]]) -> Vec<Position2D> {
    list.iter().map(|p| Position2D::new(p[0], p[1])).collect()
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| HarnessError::Config {
            origin: origin.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn antenna_layout(&self) -> Result<AntennaLayout, String> {
        let l = &self.layout;
        let layout = match (&l.transceivers, &l.tx, &l.rx) {
            (Some(t), None, None) => AntennaLayout::transceivers(positions(t)),
            (None, Some(tx), Some(rx)) => AntennaLayout::new(positions(tx), positions(rx)),
            _ => return Err("layout: give either `transceivers` or both `tx` and `rx`".into()),
        };
        layout.map_err(|e| format!("layout: {e}"))
    }

    pub fn search_region(&self) -> Result<Region, String> {
        let r = &self.region;
        Region::new(r.x_min, r.x_max, r.y_min, r.y_max).map_err(|e| format!("region: {e}"))
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), String> {
        let layout = self.antenna_layout()?;
        let region = self.search_region()?;
        if !(self.region.cell_size > 0.0) {
            return Err("region.cell_size must be positive".into());
        }
        for (i, t) in self.targets.iter().enumerate() {
            let p = Position2D::new(t.x, t.y);
            if !region.contains(&p) {
                return Err(format!("targets[{i}] at ({}, {}) lies outside the region", t.x, t.y));
            }
            if !(t.proportion > 0.0) || !t.proportion.is_finite() {
                return Err(format!("targets[{i}].proportion must be positive"));
            }
        }
        let w = &self.waveform;
        if w.samples < 2 || !(w.window > 0.0) || !(w.pulse_width > 0.0) || w.pulse_width > w.window {
            return Err("waveform: need samples >= 2 and 0 < pulse_width <= window".into());
        }
        if !(self.noise.sigma_sq > 0.0) || !self.noise.sigma_sq.is_finite() {
            return Err("noise.sigma_sq must be positive".into());
        }
        let d = &self.detection;
        if d.g_max == 0 {
            return Err("detection.g_max must be at least 1".into());
        }
        if !(d.pfa > 0.0 && d.pfa < 1.0) {
            return Err(format!("detection.pfa {} must lie strictly between 0 and 1", d.pfa));
        }
        if d.calibration_trials < crate::estimators::MIN_CALIBRATION_TRIALS {
            return Err(format!(
                "detection.calibration_trials must be at least {}",
                crate::estimators::MIN_CALIBRATION_TRIALS
            ));
        }
        if let Some(wts) = &d.path_weights {
            if wts.len() != layout.path_count() {
                return Err(format!(
                    "detection.path_weights has {} entries, layout has {} paths",
                    wts.len(),
                    layout.path_count()
                ));
            }
            if wts.iter().any(|w| !(*w >= 0.0)) || !(wts.iter().sum::<f64>() > 0.0) {
                return Err("detection.path_weights must be nonnegative with a positive sum".into());
            }
        }
        if d.algorithm == Algorithm::Joint
            && !(1..=crate::estimators::MAX_JOINT_TARGETS).contains(&self.targets.len())
        {
            return Err(format!(
                "joint search needs between 1 and {} targets",
                crate::estimators::MAX_JOINT_TARGETS
            ));
        }
        let e = &self.experiment;
        if e.trials == 0 {
            return Err("experiment.trials must be at least 1".into());
        }
        if e.snr_db.is_empty() || e.snr_db.iter().any(|s| !s.is_finite()) {
            return Err("experiment.snr_db must be a nonempty list of finite values".into());
        }
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config {
        origin: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_toml(&text, &path.display().to_string())
}
