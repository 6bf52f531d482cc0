//! High-level glue: dataset -> features -> forest -> report, shared by
//! the CLI and the end-to-end tests.

use crate::calibrate;
use crate::config::Config;
use crate::datagen::{self, Dataset};
use crate::emi::AttackLayer;
use crate::error::{Error, Result};
use crate::learn::{self, Evaluation, FeatureSet, Forest, WindowSpec};
use crate::report::{CaseReport, FidelityStats, MetricsReport, Provenance, Stats};
use crate::{Scalar, DEGENERACY_EPSILON};

/// Windowed features of the train and test splits.
pub fn split_features(
    dataset: &Dataset,
    spec: &WindowSpec,
) -> Result<(FeatureSet, FeatureSet)> {
    let mut train = Vec::new();
    for trace in dataset.train() {
        train.extend(learn::windows_from_trace(trace, spec)?);
    }
    let mut test = Vec::new();
    for trace in dataset.test() {
        test.extend(learn::windows_from_trace(trace, spec)?);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateDataset(
            "window spec yields no features for a split; traces too short?".into(),
        ));
    }
    Ok((train, test))
}

pub fn train_on_dataset(dataset: &Dataset, spec: &WindowSpec, config: &Config, seed: u64) -> Result<Forest> {
    let (train, _) = split_features(dataset, spec)?;
    learn::train_forest(&train, &config.forest, seed)
}

pub fn evaluate_on_dataset(forest: &Forest, dataset: &Dataset, spec: &WindowSpec) -> Result<Evaluation> {
    let (_, test) = split_features(dataset, spec)?;
    learn::evaluate(forest, &test)
}

/// Frame-pooled fidelity over the dwell phase of the test traces, plus
/// per-trace distributions of the same metrics.
pub fn dataset_fidelity(
    dataset: &Dataset,
    min_true_force: Scalar,
) -> (FidelityStats, Stats, Stats) {
    let pooled = crate::report::force_fidelity(
        dataset.test().flat_map(|t| t.dwell_frames().iter()),
        min_true_force,
    );
    let mut trace_cos = Vec::new();
    let mut trace_amp = Vec::new();
    for trace in dataset.test() {
        let f = crate::report::force_fidelity(trace.dwell_frames().iter(), min_true_force);
        if f.cosine_similarity.count > 0 {
            trace_cos.push(f.cosine_similarity.mean);
        }
        if f.amplitude_ratio.count > 0 {
            trace_amp.push(f.amplitude_ratio.mean);
        }
    }
    (
        pooled,
        Stats::from_values(trace_cos),
        Stats::from_values(trace_amp),
    )
}

pub fn case_report(
    label: &str,
    dataset: &Dataset,
    evaluation: Option<&Evaluation>,
    min_true_force: Scalar,
) -> CaseReport {
    let (fidelity, per_trace_cosine, per_trace_amplitude) =
        dataset_fidelity(dataset, min_true_force);
    CaseReport {
        label: label.to_string(),
        fidelity,
        per_trace_cosine: Some(per_trace_cosine),
        per_trace_amplitude: Some(per_trace_amplitude),
        classifier: evaluation.map(|e| e.into()),
    }
}

/// The attack layers for the comparison: the configured profile when one
/// is given, otherwise a freshly calibrated one.
pub fn attack_layers(config: &Config) -> Result<Vec<AttackLayer>> {
    if !config.attack.is_empty() {
        return Ok(config.attack.clone());
    }
    Ok(calibrate::calibrate(&config.protocol, &config.coupling, &config.calibration)?.layers)
}

pub struct Comparison {
    pub report: MetricsReport,
    pub forest: Forest,
    pub benign: Dataset,
    pub attacked: Dataset,
}

/// Full benign-vs-attack comparison: generate both datasets, train the
/// classifier on the benign train split, evaluate it on each test split.
pub fn run_comparison(config: &Config, seed: u64, config_hash: &str) -> Result<Comparison> {
    let protocol = datagen::PressProtocol {
        seed,
        ..config.protocol.clone()
    };
    let benign = datagen::build_dataset(&protocol, &config.sensor, &[])?;
    let layers = attack_layers(config)?;
    let attacked = datagen::build_dataset(&protocol, &config.sensor, &layers)?;

    let forest = train_on_dataset(&benign, &config.window, config, seed)?;
    let benign_eval = evaluate_on_dataset(&forest, &benign, &config.window)?;
    let attack_eval = evaluate_on_dataset(&forest, &attacked, &config.window)?;

    let min = config.metrics.min_true_force.max(DEGENERACY_EPSILON);
    let report = MetricsReport {
        cases: vec![
            case_report("non-attack", &benign, Some(&benign_eval), min),
            case_report("attack", &attacked, Some(&attack_eval), min),
        ],
        provenance: Provenance {
            seed,
            config_hash: config_hash.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    Ok(Comparison {
        report,
        forest,
        benign,
        attacked,
    })
}
