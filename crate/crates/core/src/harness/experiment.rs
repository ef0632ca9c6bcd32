//! One scenario's fixed machinery plus single-trial execution.

use rayon::prelude::*;

use crate::estimators::{
    calibrate_threshold, joint_peak, joint_search, sic_run, ssr_run, Algorithm, DetectionReport,
    EstimatorConfig, ThresholdConfig,
};
use crate::geometry::{Position2D, Scene, TargetTruth};
use crate::likelihood::{FieldPlan, Grid, ObjectiveField, ObservationModel};
use crate::signal::{
    build_waveform_set, scale_alphas_for_snr, synthesize_observation, whiten, NoiseModel, PathObservation,
};

use super::config::ScenarioConfig;
use super::rng::{stream, Domain, Purpose};
use super::HarnessError;

/// Half-width of the square acceptance window around a true target, metres.
pub const VALID_RADIUS: f64 = 200.0;

/// Both coordinate errors within [`VALID_RADIUS`].
pub fn valid_detection(estimate: &Position2D, truth: &Position2D) -> bool {
    (estimate.x - truth.x).abs() <= VALID_RADIUS && (estimate.y - truth.y).abs() <= VALID_RADIUS
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    pub detection_to_truth: Vec<Option<usize>>,
    pub truth_to_detection: Vec<Option<usize>>,
}

impl Association {
    pub fn false_declarations(&self) -> usize {
        self.detection_to_truth.iter().filter(|m| m.is_none()).count()
    }

    pub fn misses(&self) -> usize {
        self.truth_to_detection.iter().filter(|m| m.is_none()).count()
    }
}

/// Greedy matching in declaration order: each detection takes the nearest
/// unclaimed truth it validly detects; equal distances go to the lower index.
pub fn associate(report: &DetectionReport, truths: &[Position2D]) -> Association {
    let mut out = Association {
        detection_to_truth: vec![None; report.detections.len()],
        truth_to_detection: vec![None; truths.len()],
    };
    for (d, det) in report.detections.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (t, truth) in truths.iter().enumerate() {
            if out.truth_to_detection[t].is_some() || !valid_detection(&det.location, truth) {
                continue;
            }
            let dist = det.location.distance(truth);
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((t, dist));
            }
        }
        if let Some((t, _)) = best {
            out.detection_to_truth[d] = Some(t);
            out.truth_to_detection[t] = Some(d);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetResult {
    /// Index into the scenario's target list.
    pub target: usize,
    pub valid: bool,
    /// Estimate minus truth, metres; zero when not valid.
    pub error: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub report: DetectionReport,
    pub targets: Vec<TargetResult>,
    pub false_declarations: usize,
}

/// Everything about a scenario that does not change from trial to trial.
#[derive(Debug)]
pub struct Experiment {
    config: ScenarioConfig,
    scene: Scene,
    noise: NoiseModel,
    model: ObservationModel,
    plan: FieldPlan,
    noise_free: bool,
}

impl Experiment {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self, HarnessError> {
        let origin = config.name.clone();
        let cfg_err = |message: String| HarnessError::Config { origin: origin.clone(), message };
        config.validate().map_err(cfg_err)?;
        let layout = config.antenna_layout().map_err(cfg_err)?;
        let region = config.search_region().map_err(cfg_err)?;
        let grid = Grid::new(region, config.region.cell_size)?;
        let paths = layout.path_count();
        let targets = config
            .targets
            .iter()
            .map(|t| TargetTruth {
                amplitude_sq: t.proportion,
                ..TargetTruth::unit(Position2D::new(t.x, t.y), paths)
            })
            .collect();
        let scene = Scene::new(layout.clone(), targets, region)?;
        let w = &config.waveform;
        let waveforms = build_waveform_set(layout.tx().len(), w.window, w.samples, w.pulse_width)?;
        let noise = NoiseModel::new(vec![config.noise.sigma_sq; paths], config.noise.clutter)?;
        let whiteners = (0..paths)
            .map(|p| noise.whitener(p, w.samples))
            .collect::<Result<Vec<_>, _>>()?;
        let model = ObservationModel::new(layout, waveforms, whiteners)?;
        let plan = FieldPlan::new(&model, &grid)?;
        Ok(Self {
            config: config.clone(),
            scene,
            noise,
            model,
            plan,
            noise_free: false,
        })
    }

    /// Synthesize echoes without noise; whitening and SNR scaling are unchanged.
    pub fn without_noise(mut self) -> Self {
        self.noise_free = true;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Targets with unit coefficients; trials rescale them.
    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    pub fn plan(&self) -> &FieldPlan {
        &self.plan
    }

    pub fn grid(&self) -> &Grid {
        self.plan.grid()
    }

    fn seed(&self) -> u64 {
        self.config.experiment.seed
    }

    pub fn estimator_config(&self, algorithm: Algorithm) -> EstimatorConfig {
        EstimatorConfig {
            algorithm,
            g_max: self.config.detection.g_max,
            early_stop: self.config.detection.early_stop,
        }
    }

    /// The scenario's targets with coefficients scaled to `snr_db` and trial-specific phases.
    pub fn trial_scene(&self, domain: Domain, trial: usize, snr_db: f64) -> Result<Scene, HarnessError> {
        let mut rng = stream(self.seed(), domain, Purpose::Phase, trial as u32, 0);
        Ok(scale_alphas_for_snr(
            &self.scene,
            &self.model.waveforms,
            &self.model.whiteners,
            snr_db,
            &mut rng,
        )?)
    }

    /// Whitened observations on every path for `scene`, using the trial's noise streams.
    pub fn observe(&self, scene: &Scene, domain: Domain, trial: usize) -> Result<Vec<PathObservation>, HarnessError> {
        let silent;
        let noise = if self.noise_free {
            silent = NoiseModel::white(self.model.path_count(), 0.0)?;
            &silent
        } else {
            &self.noise
        };
        (0..self.model.path_count())
            .into_par_iter()
            .map(|p| {
                let mut rng = stream(self.seed(), domain, Purpose::Noise, trial as u32, p as u16);
                let raw = synthesize_observation(scene, &self.model.waveforms, noise, p, &mut rng)?;
                Ok(whiten(&raw, &self.model.whiteners[p])?)
            })
            .collect()
    }

    pub fn field(&self, scene: &Scene, domain: Domain, trial: usize) -> Result<ObjectiveField, HarnessError> {
        let obs = self.observe(scene, domain, trial)?;
        Ok(self.plan.evaluate(&obs)?)
    }

    /// Run `algorithm` on a field. The joint search looks for exactly `joint_g` targets.
    pub fn detect(
        &self,
        mut field: ObjectiveField,
        algorithm: Algorithm,
        thresholds: &ThresholdConfig,
        joint_g: usize,
    ) -> Result<DetectionReport, HarnessError> {
        let cfg = self.estimator_config(algorithm);
        Ok(match algorithm {
            Algorithm::Ssr => ssr_run(&field, &self.plan, thresholds, &cfg),
            Algorithm::Sic => sic_run(&mut field, &self.plan, thresholds, &cfg),
            Algorithm::Joint => joint_search(&self.model, &self.plan, &field, joint_g, thresholds.lambda_prime)?,
        })
    }

    fn outcome(&self, report: DetectionReport, scene: &Scene, indices: &[usize]) -> TrialOutcome {
        let truths: Vec<Position2D> = scene.targets.iter().map(|t| t.position).collect();
        let assoc = associate(&report, &truths);
        let targets = indices
            .iter()
            .zip(&assoc.truth_to_detection)
            .zip(&truths)
            .map(|((&target, det), truth)| match det {
                Some(d) => {
                    let loc = report.detections[*d].location;
                    TargetResult { target, valid: true, error: (loc.x - truth.x, loc.y - truth.y) }
                }
                None => TargetResult { target, valid: false, error: (0.0, 0.0) },
            })
            .collect();
        TrialOutcome { report, targets, false_declarations: assoc.false_declarations() }
    }

    fn with_context<T>(r: Result<T, HarnessError>, trial: usize, snr_db: f64) -> Result<T, HarnessError> {
        r.map_err(|e| HarnessError::Trial { trial, snr_db, source: Box::new(e.into()) })
    }

    /// Full scene: synthesize, whiten, evaluate, detect, associate.
    pub fn run_trial(
        &self,
        thresholds: &ThresholdConfig,
        algorithm: Algorithm,
        snr_db: f64,
        trial: usize,
    ) -> Result<TrialOutcome, HarnessError> {
        Self::with_context(
            (|| {
                let scene = self.trial_scene(Domain::Sweep, trial, snr_db)?;
                let field = self.field(&scene, Domain::Sweep, trial)?;
                let report = self.detect(field, algorithm, thresholds, scene.targets.len())?;
                let all: Vec<usize> = (0..scene.targets.len()).collect();
                Ok(self.outcome(report, &scene, &all))
            })(),
            trial,
            snr_db,
        )
    }

    /// Target `target` alone, with the same coefficients and noise as the full trial.
    pub fn run_single_target(
        &self,
        thresholds: &ThresholdConfig,
        algorithm: Algorithm,
        snr_db: f64,
        trial: usize,
        target: usize,
    ) -> Result<TrialOutcome, HarnessError> {
        Self::with_context(
            (|| {
                let scene = self.trial_scene(Domain::Sweep, trial, snr_db)?.isolate(target);
                let field = self.field(&scene, Domain::Sweep, trial)?;
                let report = self.detect(field, algorithm, thresholds, 1)?;
                Ok(self.outcome(report, &scene, &[target]))
            })(),
            trial,
            snr_db,
        )
    }

    /// Peak of the detection statistic on a noise-only trial: the grid maximum
    /// of the objective, or of the `tuple_size`-target joint objective.
    pub fn h0_statistic(&self, domain: Domain, trial: usize, tuple_size: usize) -> Result<f64, HarnessError> {
        let field = self.field(&self.scene.empty(), domain, trial)?;
        if tuple_size <= 1 {
            let cell = field.argmax(None).expect("grid has cells");
            return Ok(field.combined()[cell]);
        }
        let search = joint_peak(&self.model, &self.plan, &field, tuple_size)?;
        Ok(search.best.map_or(0.0, |(_, v)| v))
    }

    /// Threshold from `trials` calibration-domain noise-only trials.
    pub fn calibrate(&self, algorithm: Algorithm, trials: usize) -> Result<ThresholdConfig, HarnessError> {
        let tuple_size = match algorithm {
            Algorithm::Joint => self.scene.targets.len().max(1),
            _ => 1,
        };
        let peaks = (0..trials)
            .into_par_iter()
            .map(|t| self.h0_statistic(Domain::Calibration, t, tuple_size))
            .collect::<Result<Vec<_>, _>>()?;
        let mut thr = calibrate_threshold(&peaks, self.config.detection.pfa, self.model.path_count(), self.seed())?;
        thr.tuple_size = tuple_size;
        if let Some(w) = &self.config.detection.path_weights {
            thr.path_weights = w.clone();
        }
        Ok(thr)
    }

    /// Fraction of hold-out noise-only trials in which the statistic exceeds the threshold.
    pub fn false_alarm_rate(&self, thresholds: &ThresholdConfig, trials: usize) -> Result<f64, HarnessError> {
        let alarms: usize = (0..trials)
            .into_par_iter()
            .map(|t| {
                self.h0_statistic(Domain::Holdout, t, thresholds.tuple_size)
                    .map(|v| usize::from(v > thresholds.lambda_prime))
            })
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .sum();
        Ok(alarms as f64 / trials as f64)
    }
}
