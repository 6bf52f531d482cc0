//! End-to-end acceptance gate. Each test covers one numbered criterion
//! and prints a single PASS line; assertion failures mark the criterion
//! failed.

use std::path::Path;
use std::time::{Duration, Instant};

use gripsim::config::Config;
use gripsim::datagen;
use gripsim::detect::{detect, DetectorConfig};
use gripsim::emi::{self, AttackConfig, CouplingModel, PerturbMode};
use gripsim::grasp::{run_scenario, GraspScenario};
use gripsim::learn::{self, FeatureVector, ForestParams, N_FEATURES};
use gripsim::pipeline;
use gripsim::report::MetricsReport;
use gripsim::rng::RngStream;
use gripsim::sensor::SensorFrame;
use gripsim::vec3::Vec3;
use gripsim::{ForceVec, Scalar};

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn load(name: &str) -> (Config, String) {
    Config::load(&config_path(name)).expect("shipped config must parse")
}

fn pass(criterion: u32, detail: &str) {
    println!("criterion {criterion}: PASS ({detail})");
}

fn comparison() -> (MetricsReport, Duration) {
    let (config, hash) = load("table1-attack.cfg");
    let seed = config.effective_seed(None);
    let start = Instant::now();
    let cmp = pipeline::run_comparison(&config, seed, &hash).unwrap();
    (cmp.report, start.elapsed())
}

#[test]
fn criterion_1_benign_table_row() {
    let (report, elapsed) = comparison();
    let benign = &report.cases[0];
    let cos = &benign.fidelity.cosine_similarity;
    let amp = &benign.fidelity.amplitude_ratio;
    assert!(cos.mean >= 0.99, "cos mean {}", cos.mean);
    assert!(cos.std <= 0.001, "cos std {}", cos.std);
    assert!((0.99..=1.01).contains(&amp.mean), "amp mean {}", amp.mean);
    let cls = benign.classifier.as_ref().unwrap();
    let f1 = cls.macro_f1.expect("benign macro F1 must be defined");
    for (name, v) in [
        ("precision", cls.macro_precision),
        ("recall", cls.macro_recall),
        ("f1", f1),
    ] {
        assert!((0.90..=1.00).contains(&v), "macro {name} {v}");
    }
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        1,
        &format!(
            "cos {:.4}±{:.5}, amp {:.4}, P/R/F1 {:.3}/{:.3}/{:.3}, {:.1}s",
            cos.mean, cos.std, amp.mean, cls.macro_precision, cls.macro_recall, f1,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_attack_table_row() {
    let (report, elapsed) = comparison();
    let attack = &report.cases[1];
    let cos = attack.fidelity.cosine_similarity.mean;
    let amp = attack.fidelity.amplitude_ratio.mean;
    assert!((cos - 0.56).abs() <= 0.10, "cos mean {cos}");
    assert!((amp - 9.2).abs() <= 1.0, "amp mean {amp}");
    let cls = attack.classifier.as_ref().unwrap();
    assert!(cls.macro_precision <= 0.05, "macro P {}", cls.macro_precision);
    assert!(cls.macro_recall <= 0.05, "macro R {}", cls.macro_recall);
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(
        2,
        &format!(
            "cos {cos:.3}, amp {amp:.3}, P {:.3}, R {:.3}, {:.1}s",
            cls.macro_precision,
            cls.macro_recall,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_phantom_release_scenario() {
    let (config, _) = load("fig3-phantom-release.cfg");
    let start = Instant::now();
    let trace = run_scenario(&config.scenario, &config.sensor).unwrap();
    let elapsed = start.elapsed();

    let frame = |i: usize| &trace.frames[i];
    // Steady hold before the attack.
    for i in 350..=550 {
        let real = frame(i).real_normal_force();
        assert!((real - 35.0).abs() <= 1.0, "frame {i}: real {real}");
    }
    // Attack onset is frame-exact.
    let first_attack = trace
        .frames
        .iter()
        .find(|s| s.events.attack_on)
        .map(|s| s.frame_index);
    assert_eq!(first_attack, Some(550));
    // Spoofed reading collapses while the grip is still applied.
    assert!(frame(560).real_normal_force() >= 34.0);
    for i in 560..=700 {
        let spoofed = frame(i).spoofed_reading.magnitude();
        assert!(spoofed < 1.0, "frame {i}: spoofed {spoofed}");
    }
    // The chase ends in a crush before the run ends.
    let first_crush = trace
        .frames
        .iter()
        .find(|s| s.events.crush)
        .map(|s| s.frame_index)
        .expect("crush event must occur");
    assert!(first_crush < config.scenario.total_frames);
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    pass(
        3,
        &format!(
            "attack@550, crush@{first_crush}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4_sweep_finds_resonance() {
    let (config, _) = load("sweep.cfg");
    let s = &config.sweep;
    let (best, curve) = emi::frequency_sweep(
        &config.coupling,
        s.f_start,
        s.f_end,
        s.step,
        s.probe_distance,
    )
    .unwrap();
    assert_eq!(best, 313e6, "expected the 313 MHz grid point, got {best}");
    assert_eq!(curve.len(), 301);

    // Property: for arbitrary resonances, the sweep argmax is within one
    // step of the true resonance.
    let mut rng = RngStream::new(99, "sweep-property");
    for _ in 0..20 {
        let f_res = rng.next_range(s.f_start + s.step, s.f_end - s.step);
        let coupling = CouplingModel {
            resonant_freq: f_res,
            ..config.coupling.clone()
        };
        let (found, _) =
            emi::frequency_sweep(&coupling, s.f_start, s.f_end, s.step, s.probe_distance)
                .unwrap();
        assert!(
            (found - f_res).abs() <= s.step,
            "resonance {f_res} found at {found}"
        );
    }
    pass(4, "argmax 313000000 Hz; 20 random resonances within one step");
}

#[test]
fn criterion_5_zero_power_identity() {
    let coupling_for = |mode| CouplingModel {
        mode,
        ..CouplingModel::default()
    };
    let off = AttackConfig {
        emitter_power: 0.0,
        ..AttackConfig::default()
    };
    let inactive = AttackConfig {
        start_frame: 5_000,
        ..AttackConfig::default()
    };
    let mut rng = RngStream::new(7, "identity");
    let modes = [
        PerturbMode::AdditiveOffset,
        PerturbMode::ChannelGain,
        PerturbMode::Suppression,
        PerturbMode::SignedGain,
    ];
    for i in 0..1200u64 {
        let measured = ForceVec::new(
            rng.next_range(-50.0, 50.0),
            rng.next_range(-50.0, 50.0),
            rng.next_range(-50.0, 50.0),
        );
        let frame = SensorFrame {
            frame_index: i,
            time: i as Scalar / 1000.0,
            true_force: measured,
            measured_force: measured,
        };
        let mode = modes[rng.next_index(modes.len())];
        let zero_power = emi::perturb(&coupling_for(mode), &off, &frame, 100.0);
        let outside = emi::perturb(&coupling_for(mode), &inactive, &frame, 100.0);
        // Bit-exact passthrough.
        assert_eq!(measured.as_array(), zero_power.as_array());
        assert_eq!(measured.as_array(), outside.as_array());
    }
    pass(5, "1200 random frames bit-exact with power 0 and outside schedule");
}

#[test]
fn criterion_6_determinism() {
    // Comparison pipeline: identical bytes for report and forest.
    let (config, hash) = load("table1-attack.cfg");
    let mut small = config.clone();
    small.protocol.repetitions = 6;
    small.forest.n_trees = 15;
    let a = pipeline::run_comparison(&small, 1, &hash).unwrap();
    let b = pipeline::run_comparison(&small, 1, &hash).unwrap();
    assert_eq!(
        serde_json::to_vec(&a.report).unwrap(),
        serde_json::to_vec(&b.report).unwrap()
    );
    assert_eq!(
        serde_json::to_vec(&a.forest).unwrap(),
        serde_json::to_vec(&b.forest).unwrap()
    );

    // Dataset directories: byte-identical files.
    let da = tempfile::tempdir().unwrap();
    let db = tempfile::tempdir().unwrap();
    datagen::save_dataset(&a.benign, da.path()).unwrap();
    datagen::save_dataset(&b.benign, db.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(da.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in &names {
        let fa = std::fs::read(da.path().join(name)).unwrap();
        let fb = std::fs::read(db.path().join(name)).unwrap();
        assert_eq!(fa, fb, "{name:?} differs between runs");
    }

    // Scenario trace CSV bytes.
    let (fig3, _) = load("fig3-phantom-release.cfg");
    let ta = run_scenario(&fig3.scenario, &fig3.sensor).unwrap();
    let tb = run_scenario(&fig3.scenario, &fig3.sensor).unwrap();
    let (mut csv_a, mut csv_b) = (Vec::new(), Vec::new());
    ta.write_csv(&mut csv_a).unwrap();
    tb.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    pass(
        6,
        &format!(
            "report/forest JSON, {} dataset files, trace CSV all byte-identical",
            names.len()
        ),
    );
}

#[test]
fn criterion_7_metric_oracles() {
    // Independent brute-force formulas, written out long-hand.
    fn oracle_cos(a: [f64; 3], b: [f64; 3]) -> f64 {
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
    fn oracle_amp(gt: [f64; 3], m: [f64; 3]) -> f64 {
        (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
            / (gt[0] * gt[0] + gt[1] * gt[1] + gt[2] * gt[2]).sqrt()
    }

    let mut rng = RngStream::new(123, "metric-oracle");
    let mut draw = |lo: f64, hi: f64| {
        [
            rng.next_range(lo, hi),
            rng.next_range(lo, hi),
            rng.next_range(lo, hi),
        ]
    };
    let mut checked = 0;
    while checked < 1000 {
        let a = draw(-100.0, 100.0);
        let b = draw(-100.0, 100.0);
        let va = Vec3::new(a[0], a[1], a[2]);
        let vb = Vec3::new(b[0], b[1], b[2]);
        // Degenerate draws are astronomically unlikely but skip anyway.
        if va.magnitude() < 1e-6 || vb.magnitude() < 1e-6 {
            continue;
        }
        let cos = gripsim::metrics::cosine_similarity(va, vb).unwrap();
        let amp = gripsim::metrics::amplitude_ratio(va, vb).unwrap();
        let (oc, oa) = (oracle_cos(a, b), oracle_amp(a, b));
        assert!(
            (cos - oc).abs() <= 1e-9 * oc.abs().max(1.0),
            "cos {cos} vs oracle {oc}"
        );
        assert!((amp - oa).abs() <= 1e-9 * oa.abs(), "amp {amp} vs oracle {oa}");
        checked += 1;
    }
    pass(7, "1000 random inputs within 1e-9 relative of brute-force oracles");
}

#[test]
fn criterion_8_detector_flags_attack_not_benign() {
    let (config, _) = load("fig3-phantom-release.cfg");
    let attacked = run_scenario(&config.scenario, &config.sensor).unwrap();
    let result = detect(&attacked.sensor_frames(), &config.detector).unwrap();
    let first = result.summary.first_flag.expect("attack must be flagged");
    assert!(
        (548..=552).contains(&first),
        "first flag at {first}, expected within 2 frames of 550"
    );

    let benign = GraspScenario {
        attack: Vec::new(),
        ..config.scenario.clone()
    };
    let trace = run_scenario(&benign, &config.sensor).unwrap();
    let result = detect(&trace.sensor_frames(), &DetectorConfig::default()).unwrap();
    assert!(
        result.summary.flagged_fraction < 0.01,
        "benign flagged fraction {}",
        result.summary.flagged_fraction
    );
    pass(
        8,
        &format!(
            "attack flagged at {first}; benign flagged fraction {:.4}",
            result.summary.flagged_fraction
        ),
    );
}

#[test]
fn criterion_9_forest_on_separable_classes() {
    // 30 points, 3 well-separated classes on the z-mean feature.
    let fv = |z: f64| {
        let mut f = [0.0; N_FEATURES];
        f[learn::Z_MEAN_FEATURE] = z;
        f[15] = z.abs();
        FeatureVector(f)
    };
    let mut samples = Vec::new();
    for i in 0..10 {
        samples.push((fv(1.0 + 0.01 * i as f64), 0));
        samples.push((fv(5.0 + 0.01 * i as f64), 1));
        samples.push((fv(25.0 + 0.01 * i as f64), 2));
    }
    let forest = learn::train_forest(&samples, &ForestParams::default(), 17).unwrap();
    let eval = learn::evaluate(&forest, &samples).unwrap();
    assert_eq!(eval.accuracy, 1.0, "separable set must classify perfectly");
    assert_eq!(eval.macro_f1, Some(1.0));

    // Tie rule: equal votes resolve to the lowest class index.
    let stump = |class: usize| {
        let mut counts = vec![0u32; 3];
        counts[class] = 1;
        learn::Tree {
            nodes: vec![learn::Node::Leaf { counts }],
        }
    };
    let tied = learn::Forest {
        version: learn::FOREST_FORMAT_VERSION,
        n_classes: 3,
        params: ForestParams {
            n_trees: 2,
            ..ForestParams::default()
        },
        training_seed: 0,
        trees: vec![stump(2), stump(0)],
    };
    let (label, dist) = learn::predict(&tied, &fv(0.0));
    assert_eq!(label, 0);
    assert_eq!(dist, vec![0.5, 0.0, 0.5]);
    pass(9, "30-point separable set perfect; vote tie resolves to lowest class");
}
