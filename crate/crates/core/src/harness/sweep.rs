//! Monte Carlo sweeps with a resumable per-trial journal.
//!
//! Every finished trial is appended to `<out>/journal.csv` and flushed before
//! the next one is reported, so an interrupted sweep picks up where it
//! stopped. Metrics are always recomputed from the journal in (SNR, trial)
//! order, which makes `metrics.csv` independent of scheduling.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::estimators::{Algorithm, ThresholdConfig};

use super::config::ScenarioConfig;
use super::experiment::{Experiment, TargetResult, TrialOutcome};
use super::metrics::{aggregate, export_csv, MetricsRecord};
use super::HarnessError;

/// Command-line style overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub algorithm: Option<Algorithm>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<MetricsRecord>,
    pub output_dir: PathBuf,
    pub csv_path: PathBuf,
    pub thresholds: ThresholdConfig,
    /// Trials taken from an existing journal instead of being run.
    pub resumed: usize,
}

/// Whole scene, or one target alone for the single-target benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunKind {
    Full,
    Single(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalEntry {
    pub kind: RunKind,
    pub snr_db: f64,
    pub trial: usize,
    pub g_hat: usize,
    pub false_declarations: usize,
    pub targets: Vec<TargetResult>,
}

type Key = (RunKind, u64, usize);

impl JournalEntry {
    fn from_outcome(kind: RunKind, snr_db: f64, trial: usize, o: &TrialOutcome) -> Self {
        Self {
            kind,
            snr_db,
            trial,
            g_hat: o.report.g_hat(),
            false_declarations: o.false_declarations,
            targets: o.targets.clone(),
        }
    }

    fn key(&self) -> Key {
        (self.kind, self.snr_db.to_bits(), self.trial)
    }

    pub fn to_line(&self) -> String {
        let kind = match self.kind {
            RunKind::Full => "full".to_string(),
            RunKind::Single(g) => format!("single:{g}"),
        };
        let mut s = format!("{kind},{},{},{},{}", self.snr_db, self.trial, self.g_hat, self.false_declarations);
        for t in &self.targets {
            s.push_str(&format!(",{}:{}:{}:{}", t.target, u8::from(t.valid), t.error.0, t.error.1));
        }
        s
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let mut f = line.split(',');
        let kind = match f.next()? {
            "full" => RunKind::Full,
            k => RunKind::Single(k.strip_prefix("single:")?.parse().ok()?),
        };
        let snr_db = f.next()?.parse().ok()?;
        let trial = f.next()?.parse().ok()?;
        let g_hat = f.next()?.parse().ok()?;
        let false_declarations = f.next()?.parse().ok()?;
        let targets = f
            .map(|t| {
                let mut p = t.split(':');
                let target = p.next()?.parse().ok()?;
                let valid = match p.next()? {
                    "1" => true,
                    "0" => false,
                    _ => return None,
                };
                let dx = p.next()?.parse().ok()?;
                let dy = p.next()?.parse().ok()?;
                p.next().is_none().then_some(TargetResult { target, valid, error: (dx, dy) })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { kind, snr_db, trial, g_hat, false_declarations, targets })
    }
}

/// 64-bit FNV-1a, used only to fingerprint the scene part of a config.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Journal header: what must match for stored trials to be reusable.
fn journal_header(cfg: &ScenarioConfig, thr: &ThresholdConfig) -> String {
    let mut scene = cfg.clone();
    scene.name.clear();
    scene.experiment.snr_db.clear();
    scene.experiment.trials = 1;
    scene.experiment.output_dir = None;
    scene.experiment.single_target_benchmark = false;
    scene.detection.threshold_file = None;
    format!(
        "# algorithm={} seed={} lambda_prime={} scene={:016x}",
        cfg.detection.algorithm,
        cfg.experiment.seed,
        thr.lambda_prime,
        fnv1a(scene.to_toml().as_bytes())
    )
}

/// Read the stored entries, dropping a torn final line.
fn open_journal(path: &Path, header: &str) -> Result<(File, Vec<JournalEntry>), HarnessError> {
    let io = |source| HarnessError::Io { context: format!("journal {}", path.display()), source };
    let mut entries = Vec::new();
    if path.exists() {
        let mut reader = BufReader::new(File::open(path).map_err(io)?);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(io)?;
        if first.trim_end() != header {
            return Err(HarnessError::JournalMismatch {
                path: path.display().to_string(),
                found: first.trim_end().to_string(),
            });
        }
        let mut good_len = first.len() as u64;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line).map_err(io)? == 0 {
                break;
            }
            match line.strip_suffix('\n').and_then(JournalEntry::parse_line) {
                Some(e) => {
                    entries.push(e);
                    good_len += line.len() as u64;
                }
                None => break,
            }
        }
        let file = OpenOptions::new().write(true).open(path).map_err(io)?;
        file.set_len(good_len).map_err(io)?;
        let mut file = OpenOptions::new().append(true).open(path).map_err(io)?;
        file.flush().map_err(io)?;
        Ok((file, entries))
    } else {
        let mut file = File::create(path).map_err(io)?;
        writeln!(file, "{header}").map_err(io)?;
        Ok((file, entries))
    }
}

/// Load the configured threshold file, reuse a matching calibration in the
/// output directory, or calibrate and store the result there.
fn thresholds_for(exp: &Experiment, out: &Path) -> Result<ThresholdConfig, HarnessError> {
    let cfg = exp.config();
    let algorithm = cfg.detection.algorithm;
    let tuple_size = if algorithm == Algorithm::Joint { cfg.targets.len() } else { 1 };
    if let Some(file) = &cfg.detection.threshold_file {
        let thr = ThresholdConfig::load(file)?;
        if thr.tuple_size != tuple_size || thr.path_weights.len() != exp.model().path_count() {
            return Err(HarnessError::Config {
                origin: file.display().to_string(),
                message: format!(
                    "threshold was calibrated for {}-target tuples over {} paths, scenario needs {tuple_size} and {}",
                    thr.tuple_size,
                    thr.path_weights.len(),
                    exp.model().path_count()
                ),
            });
        }
        return Ok(thr);
    }
    let stored = out.join("threshold.toml");
    let weights = cfg
        .detection
        .path_weights
        .clone()
        .unwrap_or_else(|| vec![1.0; exp.model().path_count()]);
    if let Ok(thr) = ThresholdConfig::load(&stored) {
        if thr.pfa == cfg.detection.pfa
            && thr.seed == cfg.experiment.seed
            && thr.trials == cfg.detection.calibration_trials
            && thr.tuple_size == tuple_size
            && thr.path_weights == weights
        {
            return Ok(thr);
        }
    }
    let thr = exp.calibrate(algorithm, cfg.detection.calibration_trials)?;
    thr.save(&stored)?;
    Ok(thr)
}

/// Run every (SNR, trial) of the scenario and write `<out>/metrics.csv`.
pub fn run_sweep(config: &ScenarioConfig, options: &SweepOptions) -> Result<SweepOutput, HarnessError> {
    let mut cfg = config.clone();
    if let Some(a) = options.algorithm {
        cfg.detection.algorithm = a;
    }
    if let Some(s) = options.seed {
        cfg.experiment.seed = s;
    }
    let out = options
        .output_dir
        .clone()
        .or_else(|| cfg.experiment.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    cfg.experiment.output_dir = Some(out.clone());
    std::fs::create_dir_all(&out)
        .map_err(|source| HarnessError::Io { context: format!("creating {}", out.display()), source })?;

    let exp = Experiment::from_config(&cfg)?;
    let thresholds = thresholds_for(&exp, &out)?;
    let algorithm = cfg.detection.algorithm;

    let journal_path = out.join("journal.csv");
    let (file, stored) = open_journal(&journal_path, &journal_header(&cfg, &thresholds))?;

    let mut snrs: Vec<f64> = Vec::new();
    for &s in &cfg.experiment.snr_db {
        if !snrs.iter().any(|x| x.to_bits() == s.to_bits()) {
            snrs.push(s);
        }
    }
    let n_targets = cfg.targets.len();
    let mut kinds = vec![RunKind::Full];
    if cfg.experiment.single_target_benchmark {
        kinds.extend((0..n_targets).map(RunKind::Single));
    }
    let trials = cfg.experiment.trials;
    let mut done: HashMap<Key, JournalEntry> = stored.into_iter().map(|e| (e.key(), e)).collect();
    let jobs: Vec<(RunKind, f64, usize)> = kinds
        .iter()
        .flat_map(|&k| snrs.iter().flat_map(move |&s| (0..trials).map(move |t| (k, s, t))))
        .filter(|&(k, s, t)| !done.contains_key(&(k, s.to_bits(), t)))
        .collect();
    let resumed = kinds.len() * snrs.len() * trials - jobs.len();

    let writer = Mutex::new(file);
    let fresh = jobs
        .into_par_iter()
        .map(|(kind, snr, trial)| {
            let outcome = match kind {
                RunKind::Full => exp.run_trial(&thresholds, algorithm, snr, trial)?,
                RunKind::Single(g) => exp.run_single_target(&thresholds, algorithm, snr, trial, g)?,
            };
            let entry = JournalEntry::from_outcome(kind, snr, trial, &outcome);
            let mut f = writer.lock().expect("journal lock");
            writeln!(f, "{}", entry.to_line())
                .and_then(|_| f.flush())
                .map_err(|source| HarnessError::Io {
                    context: format!("appending to {}", journal_path.display()),
                    source,
                })?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    for e in fresh {
        done.insert(e.key(), e);
    }

    let mut records = Vec::new();
    for &kind in &kinds {
        let (label, targets): (String, Vec<usize>) = match kind {
            RunKind::Full => (algorithm.name().to_string(), (0..n_targets).collect()),
            RunKind::Single(g) => (format!("{}_single", algorithm.name()), vec![g]),
        };
        for &snr in &snrs {
            let entries: Vec<&JournalEntry> = (0..trials)
                .map(|t| &done[&(kind, snr.to_bits(), t)])
                .collect();
            for &g in &targets {
                let rows = entries.iter().map(|e| {
                    let r = e.targets.iter().find(|r| r.target == g);
                    let (valid, (dx, dy)) = r.map_or((false, (0.0, 0.0)), |r| (r.valid, r.error));
                    (e.g_hat, valid, dx, dy)
                });
                records.push(aggregate(&label, snr, g + 1, rows));
            }
        }
    }
    let csv_path = out.join("metrics.csv");
    export_csv(&csv_path, &records)?;
    Ok(SweepOutput { records, output_dir: out, csv_path, thresholds, resumed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn journal_line_round_trip() {
        let e = JournalEntry {
            kind: RunKind::Single(2),
            snr_db: -2.5,
            trial: 17,
            g_hat: 1,
            false_declarations: 0,
            targets: vec![TargetResult { target: 2, valid: true, error: (25.0, -1.0 / 3.0) }],
        };
        assert_eq!(JournalEntry::parse_line(&e.to_line()), Some(e.clone()));
        let full = JournalEntry { kind: RunKind::Full, targets: vec![], ..e };
        assert_eq!(JournalEntry::parse_line(&full.to_line()), Some(full));
        assert_eq!(JournalEntry::parse_line("full,1,2"), None);
        assert_eq!(JournalEntry::parse_line("full,1,2,0,0,0:1:3"), None);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
