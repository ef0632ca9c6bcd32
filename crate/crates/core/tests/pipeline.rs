use mimoloc::estimators::{Algorithm, ThresholdConfig};
use mimoloc::geometry::Position2D;
use mimoloc::harness::rng::Domain;
use mimoloc::harness::{Experiment, ScenarioConfig};

// two targets on cell centres of a 12x12 grid of 100 m cells
const SMALL: &str = r#"
name = "pipeline"
[layout]
transceivers = [[0.0, 4000.0], [-3464.1, -2000.0], [3464.1, -2000.0]]
[region]
x_min = -600.0
x_max = 600.0
y_min = -600.0
y_max = 600.0
cell_size = 100.0
[[targets]]
x = 50.0
y = 50.0
[[targets]]
x = 350.0
y = -450.0
proportion = 0.6
[waveform]
window = 4.0e-5
samples = 11637
pulse_width = 3.3e-7
[noise]
sigma_sq = 1.0
[detection]
algorithm = "sic"
g_max = 4
pfa = 0.1
[experiment]
snr_db = [10.0]
trials = 1
seed = 3
"#;

fn experiment() -> Experiment {
    let cfg = ScenarioConfig::from_toml(SMALL, "pipeline").unwrap();
    Experiment::from_config(&cfg).unwrap()
}

fn truths() -> Vec<Position2D> {
    vec![Position2D::new(50.0, 50.0), Position2D::new(350.0, -450.0)]
}

fn sorted(mut v: Vec<Position2D>) -> Vec<Position2D> {
    v.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    v
}

#[test]
fn noise_free_scene_is_recovered_exactly_with_cancellation() {
    let exp = experiment().without_noise();
    let paths = exp.model().path_count();
    let thr = ThresholdConfig::fixed(50.0, paths);
    let scene = exp.trial_scene(Domain::Sweep, 0, 20.0).unwrap();
    for algo in [Algorithm::Sic, Algorithm::Joint] {
        let field = exp.field(&scene, Domain::Sweep, 0).unwrap();
        let report = exp.detect(field, algo, &thr, 2).unwrap();
        assert_eq!(sorted(report.locations()), sorted(truths()), "{algo}");
    }
    // removal hides the weak target behind the strong one's footprint
    let field = exp.field(&scene, Domain::Sweep, 0).unwrap();
    let ssr = exp.detect(field, Algorithm::Ssr, &thr, 2).unwrap();
    assert_eq!(ssr.detections[0].location, truths()[0]);
    assert!(ssr.detections[0].footprint.union[exp.grid().cell_of(&truths()[1]).unwrap()]);
}

#[test]
fn ssr_declarations_descend_and_avoid_earlier_footprints() {
    let exp = experiment();
    let thr = ThresholdConfig::fixed(0.0, exp.model().path_count());
    for trial in 0..20 {
        let scene = exp.trial_scene(Domain::Sweep, trial, 0.0).unwrap();
        let field = exp.field(&scene, Domain::Sweep, trial).unwrap();
        let report = exp.detect(field, Algorithm::Ssr, &thr, 2).unwrap();
        for (i, d) in report.detections.iter().enumerate() {
            for earlier in &report.detections[..i] {
                assert!(d.objective <= earlier.objective);
                assert!(!earlier.footprint.union[d.cell], "trial {trial}: cell reused");
            }
        }
    }
}

#[test]
fn raising_the_threshold_never_adds_declarations() {
    let exp = experiment();
    let paths = exp.model().path_count();
    for trial in 0..10 {
        let scene = exp.trial_scene(Domain::Sweep, trial, 3.0).unwrap();
        for algo in [Algorithm::Ssr, Algorithm::Sic] {
            let mut last = usize::MAX;
            for lambda in [0.0, 10.0, 20.0, 40.0, 80.0, 1e6] {
                let field = exp.field(&scene, Domain::Sweep, trial).unwrap();
                let report = exp.detect(field, algo, &ThresholdConfig::fixed(lambda, paths), 2).unwrap();
                assert!(report.g_hat() <= last, "{algo} trial {trial} lambda {lambda}");
                assert!(report.detections.iter().all(|d| d.objective >= lambda));
                last = report.g_hat();
            }
            assert_eq!(last, 0);
        }
    }
}

#[test]
fn trials_are_reproducible_and_shared_with_the_benchmark() {
    let exp = experiment();
    let thr = ThresholdConfig::fixed(25.0, exp.model().path_count());
    let a = exp.run_trial(&thr, Algorithm::Sic, 10.0, 4).unwrap();
    let b = exp.run_trial(&thr, Algorithm::Sic, 10.0, 4).unwrap();
    assert_eq!(a.report, b.report);
    assert!(a.targets.iter().all(|t| t.valid));

    // the isolated strong target sees the same noise and coefficient
    let single = exp.run_single_target(&thr, Algorithm::Sic, 10.0, 4, 0).unwrap();
    assert_eq!(single.targets.len(), 1);
    assert!(single.targets[0].valid);
    assert_eq!(single.report.detections[0].location, truths()[0]);
}
