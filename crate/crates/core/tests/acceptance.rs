//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. `ACCEPTANCE_ONLY=3,5` runs a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mimoloc::estimators::{
    joint_peak, joint_search, sic_run, ssr_run, Algorithm, EstimatorConfig, ThresholdConfig,
};
use mimoloc::geometry::{bin_membership, classify_scene, AntennaLayout, PathId, Position2D, Region, Scene, SceneClass, TargetTruth};
use mimoloc::harness::rng::Domain;
use mimoloc::harness::{load_scenario, run_sweep, Experiment, MetricsRecord, ScenarioConfig, SweepOptions};
use mimoloc::likelihood::{alpha_mle_joint, gram_matrix, FieldPlan, GramMatrix, Grid, LikelihoodError, ObservationModel};
use mimoloc::signal::{build_waveform_set, delayed_replica, scale_alphas_for_snr, NoiseModel, PathObservation, Whitener};

type Outcome = (bool, String);

fn scenario(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&path).expect("shipped scenario loads")
}

/// Three transceivers 4 km around a 1.2 km square of 100 m cells (12 x 12).
fn small_config(seed: u64) -> ScenarioConfig {
    let text = format!(
        r#"
name = "small"
[layout]
transceivers = [[0.0, 4000.0], [-3464.1, -2000.0], [3464.1, -2000.0]]
[region]
x_min = -600.0
x_max = 600.0
y_min = -600.0
y_max = 600.0
cell_size = 100.0
[[targets]]
x = 0.0
y = 0.0
[[targets]]
x = 250.0
y = -350.0
proportion = 0.6
[waveform]
window = 4.0e-5
samples = 11637
pulse_width = 3.3e-7
[noise]
sigma_sq = 1.0
[detection]
algorithm = "sic"
g_max = 3
pfa = 0.1
calibration_trials = 100
[experiment]
snr_db = [0.0, 10.0]
trials = 20
seed = {seed}
single_target_benchmark = true
"#
    );
    ScenarioConfig::from_toml(&text, "small").unwrap()
}

fn record<'a>(records: &'a [MetricsRecord], algorithm: &str, snr: f64, target: usize) -> &'a MetricsRecord {
    records
        .iter()
        .find(|r| r.algorithm == algorithm && r.snr_db == snr && r.target == target)
        .unwrap_or_else(|| panic!("no record for {algorithm} {snr} dB target {target}"))
}

fn fmt_pd(v: &[f64]) -> String {
    v.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", ")
}

struct Shared {
    work: tempfile::TempDir,
    threshold_file: PathBuf,
    thresholds: ThresholdConfig,
    calibration_secs: f64,
}

/// Scenarios a, b and c share layout, grid, waveforms and noise, so their
/// noise-only peak statistic has one distribution and one calibration.
fn calibrate_shared() -> Shared {
    let a = scenario("scenario_a.cfg");
    for other in ["scenario_b.cfg", "scenario_c.cfg"] {
        let o = scenario(other);
        assert!(
            o.layout == a.layout && o.region == a.region && o.waveform == a.waveform && o.noise == a.noise,
            "{other} does not share the calibration setup"
        );
    }
    let t = Instant::now();
    let exp = Experiment::from_config(&a).unwrap();
    let thresholds = exp.calibrate(Algorithm::Ssr, a.detection.calibration_trials).unwrap();
    let work = tempfile::tempdir().unwrap();
    let threshold_file = work.path().join("threshold.toml");
    thresholds.save(&threshold_file).unwrap();
    Shared { work, threshold_file, thresholds, calibration_secs: t.elapsed().as_secs_f64() }
}

fn sweep(cfg: &ScenarioConfig, shared: &Shared, algorithm: Algorithm, snrs: &[f64], benchmark: bool) -> Vec<MetricsRecord> {
    let mut cfg = cfg.clone();
    cfg.detection.threshold_file = Some(shared.threshold_file.clone());
    cfg.experiment.snr_db = snrs.to_vec();
    cfg.experiment.single_target_benchmark = benchmark;
    let out = shared.work.path().join(format!("{}_{}", cfg.name, algorithm));
    let opts = SweepOptions { algorithm: Some(algorithm), seed: None, output_dir: Some(out) };
    run_sweep(&cfg, &opts).unwrap().records
}

fn criterion_1_and_2(shared: &Shared) -> (Outcome, Outcome) {
    let t = Instant::now();
    let recs = sweep(&scenario("scenario_a.cfg"), shared, Algorithm::Ssr, &[5.0, 10.0], true);
    let secs = t.elapsed().as_secs_f64();
    let pd10: Vec<f64> = (1..=3).map(|g| record(&recs, "ssr", 10.0, g).pd).collect();
    let trials = record(&recs, "ssr", 10.0, 1).trials;
    let c1 = (
        trials == 200 && pd10.iter().all(|&p| p >= 0.95),
        format!("scenario_a SSR at 10 dB over {trials} trials: Pd = [{}] (need >= 0.95 each); sweep {secs:.0} s", fmt_pd(&pd10)),
    );
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for snr in [5.0, 10.0] {
        for g in 1..=3 {
            let full = record(&recs, "ssr", snr, g).pd;
            let single = record(&recs, "ssr_single", snr, g).pd;
            worst = worst.max((full - single).abs());
            parts.push(format!("{snr} dB t{g}: {full:.3}/{single:.3}"));
        }
    }
    let c2 = (
        worst <= 0.05,
        format!("max |Pd(SSR) - Pd(single)| = {worst:.3} (need <= 0.05); {}", parts.join(", ")),
    );
    (c1, c2)
}

fn criterion_3(shared: &Shared) -> Outcome {
    let b = scenario("scenario_b.cfg");
    let ssr = sweep(&b, shared, Algorithm::Ssr, &[10.0], false);
    let sic = sweep(&b, shared, Algorithm::Sic, &[10.0], false);
    let p_ssr = record(&ssr, "ssr", 10.0, 3).pd;
    let p_sic = record(&sic, "sic", 10.0, 3).pd;
    let all_sic: Vec<f64> = (1..=3).map(|g| record(&sic, "sic", 10.0, g).pd).collect();
    (
        p_sic - p_ssr >= 0.2 && p_sic >= 0.9,
        format!(
            "scenario_b target 3 at 10 dB: Pd(SSR) = {p_ssr:.3}, Pd(SIC) = {p_sic:.3} (need gap >= 0.2, SIC >= 0.9); SIC all targets [{}]",
            fmt_pd(&all_sic)
        ),
    )
}

fn criterion_4(shared: &Shared) -> Outcome {
    let c = scenario("scenario_c.cfg");
    let recs = sweep(&c, shared, Algorithm::Sic, &[10.0], false);
    let mut ok = true;
    let mut parts = Vec::new();
    for g in 1..=6 {
        let r = record(&recs, "sic", 10.0, g);
        ok &= r.trials == 100 && r.pd >= 0.9 && r.rmse_x_m <= 150.0 && r.rmse_y_m <= 150.0;
        parts.push(format!("t{g} Pd {:.2} rmse ({:.0}, {:.0}) m", r.pd, r.rmse_x_m, r.rmse_y_m));
    }
    (ok, format!("scenario_c SIC at 10 dB, 100 trials (need Pd >= 0.9, RMSE <= 150 m): {}", parts.join("; ")))
}

fn random_scene(exp: &Experiment, rng: &mut ChaCha8Rng, g: usize, on_grid: bool, snr_db: f64) -> Scene {
    let grid = exp.grid();
    let region = *grid.region();
    let paths = exp.model().path_count();
    let targets = (0..g)
        .map(|_| {
            let position = if on_grid {
                grid.center(rng.random_range(0..grid.cell_count()))
            } else {
                Position2D::new(
                    rng.random_range(region.x_min..region.x_max),
                    rng.random_range(region.y_min..region.y_max),
                )
            };
            TargetTruth { amplitude_sq: rng.random_range(0.3..1.0), ..TargetTruth::unit(position, paths) }
        })
        .collect();
    let scene = Scene::new(exp.model().layout.clone(), targets, region).unwrap();
    scale_alphas_for_snr(&scene, &exp.model().waveforms, &exp.model().whiteners, snr_db, rng).unwrap()
}

fn criterion_5() -> Outcome {
    let exp = Experiment::from_config(&small_config(5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let zero = ThresholdConfig::fixed(0.0, exp.model().path_count());
    let tau_c = exp.model().waveforms.tau_c();
    let (mut holds, mut mixed, mut worst) = (0, 0, f64::INFINITY);
    for i in 0..100 {
        let g = 2 + i % 2;
        let scene = random_scene(&exp, &mut rng, g, false, 60.0);
        if classify_scene(&scene, tau_c).scene_class == SceneClass::Mixed {
            mixed += 1;
        }
        let field = exp.field(&scene, Domain::Sweep, i).unwrap();
        let cfg = EstimatorConfig { algorithm: Algorithm::Ssr, g_max: g, early_stop: false };
        let ssr = ssr_run(&field, exp.plan(), &zero, &cfg);
        let mut f = field.clone();
        let sic = sic_run(&mut f, exp.plan(), &zero, &EstimatorConfig { algorithm: Algorithm::Sic, ..cfg });
        let margin = (sic.accumulated_objective - ssr.accumulated_objective) / ssr.accumulated_objective.max(1e-300);
        worst = worst.min(margin);
        if margin >= -1e-9 {
            holds += 1;
        }
    }
    (
        holds == 100,
        format!("SIC accumulated >= SSR accumulated in {holds}/100 scenes ({mixed} mixed-separability); worst relative margin {worst:.3e}"),
    )
}

fn same_cells(a: &[usize], b: &[usize]) -> bool {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    a == b
}

fn within_one_cell(grid: &Grid, a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let direct = a.iter().zip(b).all(|(&x, &y)| grid.cell_distance(x, y) <= 1);
    let swapped = a.len() == 2 && grid.cell_distance(a[0], b[1]) <= 1 && grid.cell_distance(a[1], b[0]) <= 1;
    direct || swapped
}

fn criterion_6() -> Outcome {
    let noisy = Experiment::from_config(&small_config(6)).unwrap();
    let clean = Experiment::from_config(&small_config(6)).unwrap().without_noise();
    let grid = clean.grid().clone();
    let tau_c = clean.model().waveforms.tau_c();
    let zero = ThresholdConfig::fixed(0.0, clean.model().path_count());
    let cfg = EstimatorConfig { algorithm: Algorithm::Ssr, g_max: 2, early_stop: false };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    // isolated, and neither target inside the other's one-bin removal margin
    let clear_of_footprint = |s: &Scene| {
        let (a, b) = (&s.targets[0].position, &s.targets[1].position);
        s.layout.paths().all(|p| !bin_membership(a, b, &s.layout.tx()[p.tx], &s.layout.rx()[p.rx], tau_c))
    };
    let mut isolated = |exp: &Experiment, snr: f64| loop {
        let s = random_scene(exp, &mut rng, 2, true, snr);
        if classify_scene(&s, tau_c).scene_class == SceneClass::CompletelyIsolated && clear_of_footprint(&s) {
            break s;
        }
    };
    let run = |exp: &Experiment, scene: &Scene, i: usize| {
        let field = exp.field(scene, Domain::Sweep, i).unwrap();
        let cells = |r: mimoloc::estimators::DetectionReport| r.detections.iter().map(|d| d.cell).collect::<Vec<_>>();
        let j = cells(joint_search(exp.model(), exp.plan(), &field, 2, 0.0).unwrap());
        let s = cells(ssr_run(&field, exp.plan(), &zero, &cfg));
        let mut f = field.clone();
        let c = cells(sic_run(&mut f, exp.plan(), &zero, &EstimatorConfig { algorithm: Algorithm::Sic, ..cfg.clone() }));
        (j, s, c)
    };
    let mut exact = 0;
    for i in 0..50 {
        let scene = isolated(&clean, 15.0);
        let truth: Vec<usize> = scene.targets.iter().map(|t| grid.cell_of(&t.position).unwrap()).collect();
        let (j, s, c) = run(&clean, &scene, i);
        if same_cells(&j, &s) && same_cells(&s, &c) && same_cells(&j, &truth) {
            exact += 1;
        } else if std::env::var("ACCEPTANCE_DEBUG").is_ok() {
            let amp: Vec<f64> = scene.targets.iter().map(|t| t.amplitude_sq).collect();
            eprintln!("truth {truth:?} amp {amp:?} joint {j:?} ssr {s:?} sic {c:?}");
        }
    }
    let mut close = 0;
    for i in 0..100 {
        let scene = isolated(&noisy, 15.0);
        let (j, s, c) = run(&noisy, &scene, i);
        if within_one_cell(&grid, &j, &s) && within_one_cell(&grid, &s, &c) && within_one_cell(&grid, &j, &c) {
            close += 1;
        }
    }
    (
        exact == 50 && close >= 90,
        format!("12x12 grid, two isolated targets outside each other's removal margin: noise-free identical sets {exact}/50 (need 50); 15 dB within one cell {close}/100 (need >= 90)"),
    )
}

fn criterion_7() -> Outcome {
    let ts = 1e-8;
    let w = build_waveform_set(1, 63.0 * ts, 64, 16.0 * ts).unwrap();
    let path = PathId { rx: 0, tx: 0 };
    let max_delay = 63.0 - w.pulse_samples() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let (mut ok, mut singular, mut worst) = (0, 0, 0.0f64);
    for _ in 0..1000 {
        let g = rng.random_range(1..=3);
        let mut delays: Vec<f64> = Vec::with_capacity(g);
        for k in 0..g {
            let d = if k > 0 && rng.random_bool(0.35) {
                (delays[rng.random_range(0..k)] + rng.random_range(-1.5..1.5)).clamp(0.0, max_delay)
            } else {
                rng.random_range(0.0..max_delay)
            };
            delays.push(d);
        }
        let reps: Vec<_> = delays
            .iter()
            .map(|&d| delayed_replica(&w, path, Position2D::new(0.0, 0.0), d * ts).unwrap())
            .collect();
        let gram = GramMatrix::from_replicas(&reps, &delays);
        let r: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let cross = DVector::from_iterator(g, reps.iter().map(|s| s.dot(&r)));
        let close = gram.min_delay_gap < 1.0;
        match (alpha_mle_joint(&gram, &cross), close) {
            (Err(LikelihoodError::CoincidentDelays { .. }), true) => {
                singular += 1;
                ok += 1;
            }
            (Ok(alpha), false) => {
                let res = (&gram.values * &alpha - &cross).norm() / cross.norm();
                worst = worst.max(res);
                if res <= 1e-8 {
                    ok += 1;
                }
            }
            _ => {}
        }
    }
    (
        ok == 1000,
        format!("{ok}/1000 instances consistent ({singular} coincident-delay rejections); worst relative residual {worst:.2e} (need <= 1e-8)"),
    )
}

fn criterion_8(shared: &Shared) -> Outcome {
    let a = scenario("scenario_a.cfg");
    let exp = Experiment::from_config(&a).unwrap();
    let rate = exp.false_alarm_rate(&shared.thresholds, 1000).unwrap();

    let n = 8;
    let noise = NoiseModel::new(vec![1.0; 1], Some(mimoloc::signal::ClutterModel { power: 3.0, rho: 0.8 })).unwrap();
    let whitener = noise.whitener(0, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let draws = 100_000 / n;
    let mut cov = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for _ in 0..draws {
        let v = DVector::from_vec(whitener.apply(&noise.draw(0, n, &mut rng)));
        cov += &v * v.adjoint();
    }
    cov /= Complex64::new(draws as f64, 0.0);
    let dev = (cov - nalgebra::DMatrix::<Complex64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (
        (rate - 0.1).abs() <= 0.03 && dev <= 0.05,
        format!(
            "hold-out alarm rate {rate:.3} over 1000 trials (lambda' {:.3}, calibrated in {:.0} s); whitened clutter covariance max |C - I| = {dev:.4} over 1e5 samples",
            shared.thresholds.lambda_prime, shared.calibration_secs
        ),
    )
}

fn criterion_9() -> Outcome {
    let layout = AntennaLayout::new(vec![Position2D::new(-3000.0, 0.0)], vec![Position2D::new(3000.0, 0.0)]).unwrap();
    let waveforms = build_waveform_set(1, 2.5e-5, 2501, 3.3e-7).unwrap();
    let model = ObservationModel::new(layout, waveforms, vec![Whitener::identity()]).unwrap();
    let grid = Grid::new(Region::new(-200.0, 200.0, -200.0, 200.0).unwrap(), 100.0).unwrap();
    let plan = FieldPlan::new(&model, &grid).unwrap();
    // mirror images across the baseline have equal delay
    let (a, b) = (Position2D::new(50.0, 150.0), Position2D::new(50.0, -150.0));
    let gram = gram_matrix(&[a, b], &model, 0).unwrap();
    let rank = gram.numerical_rank();
    let rejected = matches!(
        alpha_mle_joint(&gram, &DVector::from_element(2, Complex64::new(1.0, 0.0))),
        Err(LikelihoodError::CoincidentDelays { .. })
    );

    let truth = Position2D::new(-50.0, 50.0);
    let s = model.whitened_replica(0, &truth).unwrap();
    let r = s.to_dense();
    let field = plan.evaluate(&[PathObservation::assume_whitened(model.layout.path(0), r)]).unwrap();
    let search = joint_peak(&model, &plan, &field, 2).unwrap();
    let mirrored = |c: usize, d: usize| {
        let (ca, cb) = (grid.coords(c), grid.coords(d));
        ca.0 == cb.0 && ca.1 + cb.1 == grid.ny() - 1
    };
    let best_ok = search.best.as_ref().is_some_and(|(cells, _)| !mirrored(cells[0], cells[1]));
    let mirror_pairs = grid.nx() * (grid.ny() / 2);
    (
        rank == 1 && gram.is_singular() && rejected && search.excluded >= mirror_pairs && best_ok,
        format!(
            "equal-delay Gram rank {rank} of 2, singular {}, solve rejected {rejected}; joint search excluded {} tuples (>= {mirror_pairs} mirror pairs), winner non-degenerate {best_ok}",
            gram.is_singular(),
            search.excluded
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = small_config(10);
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in ["first", "second"] {
        let opts = SweepOptions { output_dir: Some(dir.path().join(run)), ..Default::default() };
        let out = run_sweep(&cfg, &opts).unwrap();
        bytes.push(std::fs::read(out.csv_path).unwrap());
    }
    let identical = bytes[0] == bytes[1];
    let rows = String::from_utf8_lossy(&bytes[0]).lines().count().saturating_sub(1);
    (identical && rows > 0, format!("two sweeps with seed 10 into fresh directories: {rows} rows, byte-identical {identical}"))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let needs_shared = [1, 2, 3, 4, 8].iter().any(|&n| wanted(n));

    let shared = needs_shared.then(|| catch_unwind(calibrate_shared));
    let shared = match shared {
        Some(Ok(s)) => Some(s),
        Some(Err(_)) => {
            println!("calibration failed; criteria 1-4 and 8 cannot run");
            None
        }
        None => None,
    };

    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let guard = |f: &dyn Fn() -> Outcome| -> Outcome {
        catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        })
    };
    let missing = || (false, "calibration unavailable".to_string());

    if wanted(1) || wanted(2) {
        let (c1, c2) = match &shared {
            Some(s) => catch_unwind(AssertUnwindSafe(|| criterion_1_and_2(s)))
                .unwrap_or_else(|_| ((false, "panicked".into()), (false, "panicked".into()))),
            None => (missing(), missing()),
        };
        results.push((1, "isolated-scene detection", c1));
        results.push((2, "single-target benchmark match", c2));
    }
    let with_shared = |f: fn(&Shared) -> Outcome| match &shared {
        Some(s) => guard(&|| f(s)),
        None => missing(),
    };
    if wanted(3) {
        results.push((3, "SSR loss and SIC recovery", with_shared(criterion_3)));
    }
    if wanted(4) {
        results.push((4, "six-target SIC accuracy", with_shared(criterion_4)));
    }
    if wanted(5) {
        results.push((5, "SIC bounds SSR", guard(&criterion_5)));
    }
    if wanted(6) {
        results.push((6, "oracle equivalence", guard(&criterion_6)));
    }
    if wanted(7) {
        results.push((7, "normal-equation residual", guard(&criterion_7)));
    }
    if wanted(8) {
        results.push((8, "calibration accuracy", with_shared(criterion_8)));
    }
    if wanted(9) {
        results.push((9, "singularity handling", guard(&criterion_9)));
    }
    if wanted(10) {
        results.push((10, "sweep determinism", guard(&criterion_10)));
    }

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, (ok, detail)) in &results {
        println!("criterion {n:>2} [{}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
