//! `mimoloc` command-line front end.
//!
//! Exit status: 0 on success, 1 for scenario, threshold or usage errors,
//! 2 when a run fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mimoloc::estimators::{sic_run, Algorithm, EstimatorConfig, ThresholdConfig};
use mimoloc::harness::rng::Domain;
use mimoloc::harness::{load_scenario, run_sweep, Experiment, HarnessError, ScenarioConfig, SweepOptions};
use mimoloc::likelihood::export;

#[derive(Parser)]
#[command(name = "mimoloc", version, about = "Multi-target detection and localization for noncoherent MIMO radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the detection threshold on noise-only trials and write it to a file.
    Calibrate {
        config: PathBuf,
        /// Destination; defaults to the scenario's threshold_file or <output_dir>/threshold.toml.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides detection.calibration_trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run one trial and print the detection report.
    Run {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long)]
        trial: usize,
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        seed: Option<u64>,
        /// Threshold file; calibrates first when none is configured or stored.
        #[arg(long)]
        threshold: Option<PathBuf>,
    },
    /// Run the full SNR sweep and write metrics.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the objective field of one trial for plotting.
    Gridmap {
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long)]
        trial: usize,
        /// Apply this many successive cancellations first.
        #[arg(long, default_value_t = 0)]
        after_cancel: usize,
        /// Dump one path's log-likelihood instead of the combined objective.
        #[arg(long)]
        path: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; CSV goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(path: &Path, algo: Option<Algorithm>, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = load_scenario(path)?;
    if let Some(a) = algo {
        cfg.detection.algorithm = a;
    }
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    cfg.validate().map_err(|m| Failure::Config(format!("{}: {m}", path.display())))?;
    Ok(cfg)
}

fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.experiment
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

fn default_threshold_path(cfg: &ScenarioConfig) -> PathBuf {
    cfg.detection
        .threshold_file
        .clone()
        .unwrap_or_else(|| output_dir(cfg).join("threshold.toml"))
}

fn calibrate(
    config: &Path,
    out: Option<PathBuf>,
    algo: Option<Algorithm>,
    seed: Option<u64>,
    trials: Option<usize>,
) -> Result<(), Failure> {
    let cfg = load(config, algo, seed)?;
    let exp = Experiment::from_config(&cfg)?;
    let n = trials.unwrap_or(cfg.detection.calibration_trials);
    let thr = exp.calibrate(cfg.detection.algorithm, n)?;
    let dest = out.unwrap_or_else(|| default_threshold_path(&cfg));
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    thr.save(&dest).map_err(runtime)?;
    println!(
        "lambda_prime = {} (pfa {}, {} trials, tuple size {}) -> {}",
        thr.lambda_prime,
        thr.pfa,
        thr.trials,
        thr.tuple_size,
        dest.display()
    );
    Ok(())
}

fn thresholds_for(cfg: &ScenarioConfig, exp: &Experiment, explicit: Option<PathBuf>) -> Result<ThresholdConfig, Failure> {
    if let Some(p) = explicit {
        return ThresholdConfig::load(&p).map_err(|e| Failure::Config(e.to_string()));
    }
    let stored = default_threshold_path(cfg);
    if stored.exists() {
        return ThresholdConfig::load(&stored).map_err(|e| Failure::Config(e.to_string()));
    }
    eprintln!(
        "no threshold file at {}; calibrating on {} noise-only trials",
        stored.display(),
        cfg.detection.calibration_trials
    );
    Ok(exp.calibrate(cfg.detection.algorithm, cfg.detection.calibration_trials)?)
}

fn run(
    config: &Path,
    snr: f64,
    trial: usize,
    algo: Option<Algorithm>,
    seed: Option<u64>,
    threshold: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = load(config, algo, seed)?;
    let exp = Experiment::from_config(&cfg)?;
    let thr = thresholds_for(&cfg, &exp, threshold)?;
    let outcome = exp.run_trial(&thr, cfg.detection.algorithm, snr, trial)?;
    print!("{}", outcome.report.to_text());
    for t in &outcome.targets {
        let truth = &cfg.targets[t.target];
        if t.valid {
            println!(
                "# target {} at ({}, {}): valid, error ({:.1}, {:.1}) m",
                t.target + 1,
                truth.x,
                truth.y,
                t.error.0,
                t.error.1
            );
        } else {
            println!("# target {} at ({}, {}): missed", t.target + 1, truth.x, truth.y);
        }
    }
    println!("# false declarations: {}", outcome.false_declarations);
    Ok(())
}

fn sweep(config: &Path, algo: Option<Algorithm>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load(config, algo, seed)?;
    let result = run_sweep(&cfg, &SweepOptions { algorithm: algo, seed, output_dir: out })?;
    eprintln!(
        "lambda_prime {}; {} trials reused from journal",
        result.thresholds.lambda_prime, result.resumed
    );
    for r in &result.records {
        eprintln!(
            "{:>12} {:>6} dB target {}: Pd {:.3}  RMSE ({:.1}, {:.1}) m  mean G {:.2}",
            r.algorithm, r.snr_db, r.target, r.pd, r.rmse_x_m, r.rmse_y_m, r.g_hat_mean
        );
    }
    println!("{}", result.csv_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gridmap(
    config: &Path,
    snr: f64,
    trial: usize,
    after_cancel: usize,
    path: Option<usize>,
    format: Format,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = load(config, None, seed)?;
    let exp = Experiment::from_config(&cfg)?;
    let paths = exp.model().path_count();
    if let Some(p) = path.filter(|&p| p >= paths) {
        return Err(Failure::Config(format!("path {p} out of range; the layout has {paths} paths")));
    }
    let scene = exp.trial_scene(Domain::Sweep, trial, snr)?;
    let mut field = exp.field(&scene, Domain::Sweep, trial)?;
    if after_cancel > 0 {
        let zero = ThresholdConfig::fixed(0.0, paths);
        let est = EstimatorConfig { algorithm: Algorithm::Sic, g_max: after_cancel, early_stop: false };
        let report = sic_run(&mut field, exp.plan(), &zero, &est);
        for d in &report.detections {
            eprintln!("cancelled iteration {} at ({}, {})", d.iteration, d.location.x, d.location.y);
        }
    }
    let values: Vec<f64> = match path {
        None => field.combined().to_vec(),
        Some(p) => (0..field.cell_count())
            .map(|c| if field.is_cancelled(p, c) { 0.0 } else { field.ll(p, c) })
            .collect(),
    };
    let grid = exp.grid();
    let mut sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?)),
        None => match format {
            Format::Csv => Box::new(BufWriter::new(std::io::stdout().lock())),
            Format::Bin => return Err(Failure::Config("binary output needs --out".into())),
        },
    };
    match format {
        Format::Csv => export::write_csv(&mut sink, grid, &values).map_err(runtime)?,
        Format::Bin => export::write_binary(&mut sink, grid, path.map(|p| p as u32), &values).map_err(runtime)?,
    }
    sink.flush().map_err(runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Calibrate { config, out, algo, seed, trials } => calibrate(&config, out, algo, seed, trials),
        Command::Run { config, snr, trial, algo, seed, threshold } => run(&config, snr, trial, algo, seed, threshold),
        Command::Sweep { config, algo, seed, out } => sweep(&config, algo, seed, out),
        Command::Gridmap { config, snr, trial, after_cancel, path, format, seed, out } => {
            gridmap(&config, snr, trial, after_cancel, path, format, seed, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
