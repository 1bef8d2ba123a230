//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use magspy::classifier::{load_model, save_model, train_forest, FeatureVector, ForestConfig, MaxFeatures};
use magspy::harness::{
    run, run_closed_world, run_continuous, run_movement, run_open_world, run_sampling_sweep, ExperimentConfig,
    Scenario,
};
use magspy::metrics::{precision_recall_f1, ConfusionCounts};
use magspy::preprocess::pca_first_component;
use magspy::simulator::{render_recording, DeviceProfile, MotionScript, RotationEvent};
use magspy::trace::{load_recordings, save_recordings, CpuPattern, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn pca_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_dot, mut worst_var) = (1.0f64, 0.0f64);
    for _ in 0..1000 {
        let len = rng.random_range(100..=10_000);
        let mag = common::random_cloud(&mut rng, len);
        let pca = pca_first_component(&mag, 100.0).unwrap();
        let (v, lambda) = common::pca_oracle(&mag);
        let dot = (pca.component[0] * v.x + pca.component[1] * v.y + pca.component[2] * v.z).abs();
        let var = common::sample_variance(&pca.projected.values);
        worst_dot = worst_dot.min(dot);
        worst_var = worst_var.max((var - lambda).abs() / lambda);
    }
    let elapsed = start.elapsed();
    verdict(
        worst_dot > 1.0 - 1e-9 && worst_var <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("min |dot| = 1 - {:.1e}, max variance error {:.1e}, {}", 1.0 - worst_dot, worst_var, secs(elapsed)),
    )
}

fn forest_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (rows, labels) = common::random_split_dataset(&mut rng);
        let n_classes = labels.iter().max().unwrap() + 1;
        if common::learned_split(&rows, &labels) != common::brute_force_split(&rows, &labels, n_classes) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{mismatches}/200 splits differ from brute force, {}", secs(elapsed)),
    )
}

fn closed_world() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let r = run_closed_world(&cfg).unwrap();
    let elapsed = start.elapsed();
    let reference = ForestConfig { n_estimators: 1100, max_features: MaxFeatures::Log2, max_depth: 50, min_impurity_decrease: 1e-4, ..r.forest.clone() };
    verdict(
        r.eval.accuracy >= 0.90 && r.forest == reference && r.n_test == 160 && elapsed < Duration::from_secs(180),
        format!("accuracy {:.3} on {} test traces (chance 0.05), {}", r.eval.accuracy, r.n_test, secs(elapsed)),
    )
}

fn snr_threshold() -> Verdict {
    let cfg = ExperimentConfig { snr_db: 4.0, ..Default::default() };
    let r = run_closed_world(&cfg).unwrap();
    verdict(r.eval.accuracy >= 0.25, format!("accuracy {:.3} at 4 dB", r.eval.accuracy))
}

fn sampling_sweep() -> Verdict {
    let cfg = ExperimentConfig::default();
    let r = run_sampling_sweep(&cfg, &[100.0, 10.0, 1.0, 0.5]).unwrap();
    let acc: Vec<f64> = r.rows.iter().map(|row| row.accuracy).collect();
    verdict(
        acc[1] >= acc[0] - 0.10 && acc[3] < 2.0 * r.chance,
        format!("accuracy at 100/10/1/0.5 Hz = {:.3}/{:.3}/{:.3}/{:.3}", acc[0], acc[1], acc[2], acc[3]),
    )
}

fn continuous() -> Verdict {
    let cfg = ExperimentConfig::for_scenario(Scenario::Continuous);
    let r = run_continuous(&cfg).unwrap();
    let recall = r.recall.unwrap_or(0.0);
    let peaks = r.classify_at_peaks_accuracy.unwrap_or(0.0);
    verdict(
        r.streams.len() == 50 && recall >= 0.70 && (peaks - r.closed_world_accuracy).abs() <= 0.15,
        format!(
            "recall {:.3}, precision {:.3}, classify-at-peaks {:.3} vs known-start {:.3}",
            recall,
            r.precision.unwrap_or(0.0),
            peaks,
            r.closed_world_accuracy
        ),
    )
}

fn open_world() -> Verdict {
    let cfg = ExperimentConfig::for_scenario(Scenario::OpenWorld);
    let r = run_open_world(&cfg).unwrap();
    let precision = r.mean_monitored_precision.unwrap_or(0.0);
    let hand = precision_recall_f1(&ConfusionCounts::new(2, 1, 2));
    let r3 = |v: Option<f64>| (v.unwrap() * 1000.0).round() / 1000.0;
    let hand_ok = r3(hand.precision) == 0.667 && r3(hand.recall) == 0.5 && r3(hand.f1) == 0.571;
    verdict(
        precision >= 0.85 && hand_ok && r.n_test_background == 200,
        format!(
            "mean monitored precision {:.3} (pooled recall {:.3}); hand case ({:.3}, {:.3}, {:.3})",
            precision,
            r.pooled.recall.unwrap_or(0.0),
            hand.precision.unwrap(),
            hand.recall.unwrap(),
            hand.f1.unwrap()
        ),
    )
}

fn movement() -> Verdict {
    let cfg = ExperimentConfig::for_scenario(Scenario::Movement);
    let r = run_movement(&cfg).unwrap();
    let moving = r.motion_flagged.unwrap_or(0.0);
    let still = r.stationary_flagged.unwrap_or(1.0);
    let filtered = r.filtered_accuracy.unwrap_or(0.0);
    verdict(
        (r.rejected_fraction - 0.21).abs() <= 0.03 && moving >= 0.95 && still <= 0.05 && filtered > r.unfiltered_accuracy,
        format!(
            "rejected {:.3}, flagged {:.3} of moving / {:.3} of stationary, accuracy {:.3} -> {:.3}",
            r.rejected_fraction, moving, still, r.unfiltered_accuracy, filtered
        ),
    )
}

fn small(scenario: Scenario) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_scenario(scenario);
    cfg.classes = 6;
    cfg.traces_per_class = 10;
    cfg.seed = 9;
    cfg.forest.n_estimators = 40;
    cfg.open_world.monitored = 2;
    cfg.open_world.unmonitored_train = 3;
    cfg.open_world.background = 10;
    cfg.continuous.streams = 4;
    cfg.continuous.stream_s = 60.0;
    cfg
}

fn report_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    let r = run(cfg).unwrap();
    let mut bytes = serde_json::to_vec_pretty(&r).unwrap();
    bytes.extend(r.to_text().into_bytes());
    bytes
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

fn determinism() -> Verdict {
    let scenarios =
        [Scenario::ClosedWorld, Scenario::OpenWorld, Scenario::Sweep, Scenario::Continuous, Scenario::Movement, Scenario::Snr];
    let mut unstable = Vec::new();
    for s in scenarios {
        let cfg = small(s);
        let a = report_bytes(&cfg);
        let b = report_bytes(&cfg);
        let one = in_pool(1, || report_bytes(&cfg));
        let three = in_pool(3, || report_bytes(&cfg));
        if a != b || a != one || a != three {
            unstable.push(s.name());
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cpu = CpuPattern::new((0..300).map(|_| rng.random_range(0.0..1.0)).collect(), 100.0).unwrap();
    let motion = MotionScript {
        rotation_events: vec![RotationEvent { start_index: 20, duration_samples: 90, peak_rate_rad_s: 1.3, axis: [0.0, 0.6, 0.8] }],
    };
    let device = DeviceProfile { gyro_noise_std: 0.01, ..DeviceProfile::with_snr(12.0, 100.0) };
    let mut recs = vec![render_recording(&cpu, &device, Some(&motion), 1).unwrap()];
    recs[0].label = Some("a".into());
    recs[0].meta.insert("k".into(), "v".into());
    let path = dir.path().join("r.jsonl");
    save_recordings(&recs, &path).unwrap();
    let recordings_exact = load_recordings(&path).unwrap() == recs;

    let items: Vec<(FeatureVector, String)> = (0..40)
        .map(|i| {
            let values = (0..5).map(|_| rng.random::<f64>()).collect();
            (FeatureVector::new(values), format!("c{}", i % 3))
        })
        .collect();
    let model = train_forest(&Dataset::from_items(items), &ForestConfig { n_estimators: 15, ..Default::default() }).unwrap();
    save_model(&model, dir.path().join("m.json")).unwrap();
    let model_exact = load_model(dir.path().join("m.json")).unwrap() == model;

    verdict(
        unstable.is_empty() && recordings_exact && model_exact,
        format!(
            "unstable scenarios: {:?}; recording round-trip exact: {recordings_exact}; model round-trip exact: {model_exact}",
            unstable
        ),
    )
}

fn null_channel() -> Verdict {
    let cfg = ExperimentConfig {
        traces_per_class: 100,
        device: Some(DeviceProfile { gain: 0.0, ..DeviceProfile::with_snr(12.0, 100.0) }),
        ..Default::default()
    };
    let r = run_closed_world(&cfg).unwrap();
    let c = cfg.classes as f64;
    verdict(
        r.n_test >= 400 && r.eval.accuracy >= 0.5 / c && r.eval.accuracy <= 2.5 / c,
        format!("accuracy {:.3} on {} test traces, bounds [{:.3}, {:.3}]", r.eval.accuracy, r.n_test, 0.5 / c, 2.5 / c),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("pca oracle", pca_oracle),
        ("forest split oracle", forest_oracle),
        ("closed world at 12 dB", closed_world),
        ("closed world at 4 dB", snr_threshold),
        ("sampling-rate sweep", sampling_sweep),
        ("continuous-stream detection", continuous),
        ("open world precision", open_world),
        ("movement filtering", movement),
        ("determinism and round-trips", determinism),
        ("null channel", null_channel),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<30} {}  {}", i + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
