use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use magspy::classifier::{extract_features, load_model, save_model, CvOutcome, ForestConfig, ForestModel};
use magspy::detector::{average_pattern, detect, detect_and_classify, score_detections, ActivityPattern, PeakThresholds};
use magspy::harness::{
    effective_bins, fit, preprocess_all, render_stream, write_report, Corpus, ExperimentConfig, Scenario,
};
use magspy::metrics::{confusion, precision_recall_f1, ConfusionCounts, EvalReport, Scores};
use magspy::motion::{filter_by, MotionThresholds};
use magspy::preprocess::preprocess_recording;
use magspy::simulator::DeviceProfile;
use magspy::trace::{load_recordings, read_json, save_recordings, write_json, Dataset, SensorRecording};
use magspy::{Error, Result};

use crate::{Command, Common, MotionArgs, PeakArgs};

/// Meta key holding the comma-separated target start times of a stream, s.
const TRUTH_KEY: &str = "truth_s";

pub fn run(common: &Common, command: Command) -> Result<String> {
    set_threads(common.threads)?;
    let mut cfg = load_config(common)?;
    match command {
        Command::Simulate { classes, traces_per_class, streams } => {
            if let Some(c) = classes {
                cfg.classes = c;
            }
            if let Some(t) = traces_per_class {
                cfg.traces_per_class = t;
            }
            if let Some(r) = common.rate {
                cfg.rate_hz = r;
                if let Some(d) = cfg.device.as_mut() {
                    d.rate_hz = r;
                }
                cfg.extra_devices.iter_mut().for_each(|d| d.rate_hz = r);
            }
            simulate(&cfg, streams, &common.out)
        }
        Command::Train { data, pattern_label } => {
            cfg.target_rate_hz = common.rate.or(cfg.target_rate_hz);
            train(&cfg, &data, pattern_label.as_deref(), &common.out)
        }
        Command::Classify { model, data, motion } => {
            cfg.target_rate_hz = common.rate.or(cfg.target_rate_hz);
            classify(&cfg, &model, &data, &motion, false, &common.out)
        }
        Command::Detect { data, pattern, model, peaks } => {
            cfg.target_rate_hz = common.rate.or(cfg.target_rate_hz);
            detect_streams(&cfg, &data, &pattern, model.as_deref(), &peaks, &common.out)
        }
        Command::Eval { scenario, model: Some(model), data: Some(data), motion } => {
            if scenario.is_some() {
                return Err(Error::Invalid("--scenario cannot be combined with --model/--data".into()));
            }
            cfg.target_rate_hz = common.rate.or(cfg.target_rate_hz);
            classify(&cfg, &model, &data, &motion, true, &common.out)
        }
        Command::Eval { scenario, motion, .. } => {
            if let Some(s) = scenario {
                cfg.scenario = s.parse()?;
            }
            cfg.target_rate_hz = common.rate.or(cfg.target_rate_hz);
            cfg.movement.thresholds = motion_thresholds(&cfg.movement.thresholds, &motion);
            scenario_run(&cfg, &common.out)
        }
        Command::Snr { gains } => {
            cfg.scenario = Scenario::Snr;
            if let Some(g) = gains {
                cfg.snr.gains = g;
            }
            scenario_run(&cfg, &common.out)
        }
        Command::Sweep { rates } => {
            cfg.scenario = Scenario::Sweep;
            if let Some(r) = rates {
                cfg.sweep.rates_hz = r;
            }
            scenario_run(&cfg, &common.out)
        }
    }
}

#[cfg(feature = "parallel")]
fn set_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(0) => Err(Error::Invalid("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("cannot start {n} threads: {e}"))),
        None => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(0) => Err(Error::Invalid("--threads must be positive".into())),
        _ => Ok(()),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &common.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.forest.seed = seed;
    }
    if let Some(path) = &common.device_profile {
        let device: DeviceProfile = read_json(path)?;
        device.validate()?;
        cfg.device = Some(device);
    }
    if let Some(r) = common.rate {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Invalid(format!("--rate must be positive, got {r}")));
        }
    }
    Ok(cfg)
}

fn motion_thresholds(base: &MotionThresholds, args: &MotionArgs) -> MotionThresholds {
    MotionThresholds {
        mean_threshold: args.motion_mean_threshold.unwrap_or(base.mean_threshold),
        max_threshold: args.motion_max_threshold.unwrap_or(base.max_threshold),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let io = |e| Error::Io { path: path.to_path_buf(), source: e };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn finish<T: Serialize>(out: &Path, report: &T, text: String) -> Result<String> {
    write_report(out, report, &text)?;
    Ok(text)
}

fn scenario_run(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let report = magspy::harness::run(cfg)?;
    report.write(out)?;
    Ok(report.to_text())
}

#[derive(Serialize)]
struct SimulateReport {
    kind: &'static str,
    n_recordings: usize,
    class_names: Vec<String>,
    rate_hz: f64,
    path: PathBuf,
    config: ExperimentConfig,
}

fn simulate(cfg: &ExperimentConfig, streams: Option<usize>, out: &Path) -> Result<String> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let corpus = Corpus::numbered(cfg, "class", cfg.classes)?;
    let (kind, recordings, path) = match streams {
        Some(n) => {
            let recs = (0..n)
                .map(|s| {
                    let (mut rec, embeds) = render_stream(cfg, &corpus, s)?;
                    let truth: Vec<String> = embeds
                        .iter()
                        .filter(|e| e.is_target)
                        .map(|e| (e.start_index as f64 / rec.rate_hz).to_string())
                        .collect();
                    rec.meta.insert(TRUTH_KEY.to_string(), truth.join(","));
                    rec.meta.insert("embeds".to_string(), serde_json::to_string(&embeds)?);
                    Ok(rec)
                })
                .collect::<Result<Vec<_>>>()?;
            ("streams", recs, out.join("streams.jsonl"))
        }
        None => {
            let instances: Vec<_> = corpus.instances(cfg.traces_per_class).items.into_iter().map(|(i, _)| i).collect();
            let mut recs = corpus.render_all(&instances, cfg)?;
            for (rec, inst) in recs.iter_mut().zip(&instances) {
                rec.meta.insert("rep".to_string(), inst.rep.to_string());
            }
            ("traces", recs, out.join("recordings.jsonl"))
        }
    };
    save_recordings(&recordings, &path)?;
    let report = SimulateReport {
        kind,
        n_recordings: recordings.len(),
        class_names: corpus.class_names.clone(),
        rate_hz: corpus.devices[0].rate_hz,
        path: path.clone(),
        config: cfg.clone(),
    };
    let text = format!(
        "simulated {} {kind} of {} classes at {} Hz\nwritten to {}\n",
        report.n_recordings,
        report.class_names.len(),
        report.rate_hz,
        path.display()
    );
    finish(out, &report, text)
}

fn labeled_recordings(recs: &[SensorRecording]) -> Result<Vec<String>> {
    recs.iter()
        .enumerate()
        .map(|(i, r)| r.label.clone().ok_or_else(|| Error::Invalid(format!("recording {} has no label", i + 1))))
        .collect()
}

#[derive(Serialize)]
struct TrainReport {
    n_recordings: usize,
    class_names: Vec<String>,
    n_features: usize,
    forest: ForestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvOutcome>,
    model_path: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pattern_path: Option<PathBuf>,
}

fn train(cfg: &ExperimentConfig, data: &Path, pattern_label: Option<&str>, out: &Path) -> Result<String> {
    cfg.forest.validate()?;
    let recs = load_recordings(data)?;
    let labels = labeled_recordings(&recs)?;
    let traces = preprocess_all(&recs, cfg.target_rate_hz)?;
    let dataset = Dataset::from_items(traces.into_iter().zip(labels).collect());
    let shortest = dataset.items.iter().map(|(t, _)| t.len()).min().ok_or_else(|| Error::Invalid("no recordings".into()))?;
    let bins = effective_bins(cfg, shortest);
    let trained = fit(cfg, &dataset.items, &dataset.class_names, bins)?;

    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let model_path = out.join("model.json");
    save_model(&trained.model, &model_path)?;
    let pattern_path = match pattern_label {
        Some(label) => {
            let members: Vec<_> = dataset.items.iter().filter(|(_, l)| l == label).map(|(t, _)| t.clone()).collect();
            if members.is_empty() {
                return Err(Error::UnknownLabel(label.to_string()));
            }
            let path = out.join("pattern.json");
            write_json(&average_pattern(&members, label)?, &path)?;
            Some(path)
        }
        None => None,
    };
    let report = TrainReport {
        n_recordings: recs.len(),
        class_names: dataset.class_names.clone(),
        n_features: bins,
        forest: trained.config,
        cv: trained.cv,
        model_path,
        pattern_path,
    };
    let mut text = format!(
        "trained {} trees on {} recordings, {} classes, {} features\n",
        report.forest.n_estimators,
        report.n_recordings,
        report.class_names.len(),
        report.n_features
    );
    if let Some(cv) = &report.cv {
        let _ = writeln!(text, "cross-validated accuracy of the chosen config: {:.1}%", 100.0 * cv.mean_accuracy[cv.best_index]);
    }
    finish(out, &report, text)
}

#[derive(Serialize)]
struct PredictionRow {
    index: usize,
    device_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    rejected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probabilities: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ClassifyReport {
    n_recordings: usize,
    n_rejected: usize,
    n_without_gyro: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    motion_thresholds: Option<MotionThresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eval: Option<EvalReport>,
}

fn predict_one(model: &ForestModel, rec: &SensorRecording, rate: Option<f64>) -> Result<(String, Vec<f64>)> {
    let trace = preprocess_recording(rec, rate)?;
    let p = model.predict(&extract_features(&trace, model.n_features)?)?;
    Ok((p.label, p.probabilities))
}

fn classify(
    cfg: &ExperimentConfig,
    model_path: &Path,
    data: &Path,
    motion: &MotionArgs,
    require_labels: bool,
    out: &Path,
) -> Result<String> {
    let model = load_model(model_path)?;
    let recs = load_recordings(data)?;
    if require_labels {
        labeled_recordings(&recs)?;
    }
    let filtering = motion.motion_mean_threshold.is_some() || motion.motion_max_threshold.is_some();
    let thresholds = filtering.then(|| motion_thresholds(&MotionThresholds::default(), motion));
    let indices: Vec<usize> = (0..recs.len()).collect();
    let (kept, n_without_gyro) = match &thresholds {
        Some(t) => {
            let f = filter_by(&indices, t, |&i| &recs[i])?;
            (f.kept, f.without_gyro)
        }
        None => (indices, recs.iter().filter(|r| r.gyro.is_none()).count()),
    };
    let mut keep = vec![false; recs.len()];
    kept.iter().for_each(|&i| keep[i] = true);

    let predictions = magspy::par::try_map_slice(&kept, |&i| predict_one(&model, &recs[i], cfg.target_rate_hz))?;
    let mut rows: Vec<PredictionRow> = recs
        .iter()
        .enumerate()
        .map(|(i, r)| PredictionRow {
            index: i,
            device_id: r.device_id.clone(),
            label: r.label.clone(),
            rejected: !keep[i],
            predicted: None,
            probabilities: None,
        })
        .collect();
    for (&i, (label, probs)) in kept.iter().zip(predictions) {
        rows[i].predicted = Some(label);
        rows[i].probabilities = Some(probs);
    }

    let scored: Vec<&PredictionRow> = rows.iter().filter(|r| !r.rejected).collect();
    let eval = if !scored.is_empty() && scored.iter().all(|r| r.label.is_some()) {
        let pairs = scored.iter().map(|r| (r.label.as_deref().unwrap_or(""), r.predicted.as_deref().unwrap_or("")));
        Some(EvalReport::from_confusion(confusion(pairs, &model.class_names)?))
    } else {
        None
    };

    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    write_jsonl(&out.join("predictions.jsonl"), &rows)?;
    let report = ClassifyReport {
        n_recordings: recs.len(),
        n_rejected: recs.len() - kept.len(),
        n_without_gyro,
        motion_thresholds: thresholds,
        eval,
    };
    let mut text = format!("recordings: {}  rejected by motion: {}\n", report.n_recordings, report.n_rejected);
    if let Some(e) = &report.eval {
        text.push_str(&e.to_text());
    }
    finish(out, &report, text)
}

#[derive(Serialize)]
struct DetectionRow {
    stream: usize,
    time_s: f64,
    score: f64,
    label: Option<String>,
}

#[derive(Serialize)]
struct DetectReport {
    n_streams: usize,
    n_detections: usize,
    thresholds: PeakThresholds,
    window_s: f64,
    tolerance_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<ConfusionCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Scores>,
}

fn truth_starts(rec: &SensorRecording, rate_hz: f64) -> Result<Option<Vec<(usize, String)>>> {
    let (Some(raw), Some(label)) = (rec.meta.get(TRUTH_KEY), rec.label.as_ref()) else {
        return Ok(None);
    };
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let t: f64 = s.trim().parse().map_err(|_| Error::Invalid(format!("bad {TRUTH_KEY} entry {s:?}")))?;
            Ok(((t * rate_hz).round() as usize, label.clone()))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn detect_streams(
    cfg: &ExperimentConfig,
    data: &Path,
    pattern_path: &Path,
    model_path: Option<&Path>,
    peaks: &PeakArgs,
    out: &Path,
) -> Result<String> {
    let base = &cfg.continuous.thresholds;
    let thresholds = PeakThresholds {
        min_height: peaks.min_height.unwrap_or(base.min_height),
        min_prominence: peaks.min_prominence.unwrap_or(base.min_prominence),
        min_width_samples: peaks.min_width.unwrap_or(base.min_width_samples),
    };
    thresholds.validate()?;
    let window_s = peaks.window_s.unwrap_or(cfg.continuous.window_s);
    let tolerance_s = peaks.tolerance_s.unwrap_or(cfg.continuous.tolerance_s);
    if !(window_s > 0.0 && tolerance_s >= 0.0) {
        return Err(Error::Invalid("--window-s must be positive and --tolerance-s non-negative".into()));
    }
    let pattern: ActivityPattern = read_json(pattern_path)?;
    let model = model_path.map(load_model).transpose()?;
    let recs = load_recordings(data)?;

    let mut rows = Vec::new();
    let mut counts: Option<ConfusionCounts> = None;
    for (s, rec) in recs.iter().enumerate() {
        let stream = preprocess_recording(rec, cfg.target_rate_hz)?;
        let found = match &model {
            Some(m) => detect_and_classify(&stream, &pattern, &thresholds, m, window_s)?,
            None => detect(&stream, &pattern, &thresholds)?,
        };
        if let Some(truth) = truth_starts(rec, stream.rate_hz)? {
            let c = score_detections(&found, &truth, tolerance_s, stream.rate_hz);
            counts = Some(counts.map_or(c, |acc| acc + c));
        }
        rows.extend(found.into_iter().map(|d| DetectionRow {
            stream: s,
            time_s: d.time_index as f64 / stream.rate_hz,
            score: d.score,
            label: d.predicted_label,
        }));
    }

    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    write_jsonl(&out.join("detections.jsonl"), &rows)?;
    let report = DetectReport {
        n_streams: recs.len(),
        n_detections: rows.len(),
        thresholds,
        window_s,
        tolerance_s,
        scores: counts.as_ref().map(precision_recall_f1),
        counts,
    };
    let mut text = format!("streams: {}  detections: {}\n", report.n_streams, report.n_detections);
    if let (Some(c), Some(sc)) = (&report.counts, &report.scores) {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}", 100.0 * x));
        let _ = writeln!(text, "tp: {}  fp: {}  fn: {}", c.tp, c.fp, c.fn_);
        let _ = writeln!(text, "precision: {}%  recall: {}%", pct(sc.precision), pct(sc.recall));
    }
    finish(out, &report, text)
}
