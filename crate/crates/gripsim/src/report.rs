//! Aggregation of per-trace metrics into the benign/attack comparison
//! table, plus plot-ready time-series export.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::SimTrace;
use crate::learn::Evaluation;
use crate::metrics;
use crate::sensor::SensorFrame;
use crate::{Scalar, DEGENERACY_EPSILON};

/// Running mean / population std / extrema.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Stats {
    pub mean: Scalar,
    pub std: Scalar,
    pub min: Scalar,
    pub max: Scalar,
    pub count: usize,
}

impl Stats {
    pub fn from_values(values: impl IntoIterator<Item = Scalar>) -> Stats {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut min = Scalar::INFINITY;
        let mut max = Scalar::NEG_INFINITY;
        for v in values {
            n += 1;
            sum += v;
            sum_sq += v * v;
            min = min.min(v);
            max = max.max(v);
        }
        if n == 0 {
            return Stats::default();
        }
        let mean = sum / n as Scalar;
        let var = (sum_sq / n as Scalar - mean * mean).max(0.0);
        Stats {
            mean,
            std: var.sqrt(),
            min,
            max,
            count: n,
        }
    }
}

/// Pooled force-fidelity statistics over aligned (true, measured) frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityStats {
    pub cosine_similarity: Stats,
    pub amplitude_ratio: Stats,
    pub angle_deg: Stats,
}

/// Per-frame metric values pooled over the given frames. Frames whose
/// ground truth is at or below `min_true_force` are excluded
/// (contact-free); frames whose measured vector is degenerate contribute
/// to the amplitude ratio but not to the angular metrics.
pub fn force_fidelity<'a>(
    frames: impl IntoIterator<Item = &'a SensorFrame>,
    min_true_force: Scalar,
) -> FidelityStats {
    let mut cos_values = Vec::new();
    let mut amp_values = Vec::new();
    let mut angle_values = Vec::new();
    for f in frames {
        if f.true_force.magnitude() <= min_true_force {
            continue;
        }
        if let Ok(r) = metrics::amplitude_ratio(f.true_force, f.measured_force) {
            amp_values.push(r);
        }
        if f.measured_force.magnitude() > DEGENERACY_EPSILON {
            if let Ok(c) = metrics::cosine_similarity(f.true_force, f.measured_force) {
                cos_values.push(c);
                angle_values.push(c.acos().to_degrees());
            }
        }
    }
    FidelityStats {
        cosine_similarity: Stats::from_values(cos_values),
        amplitude_ratio: Stats::from_values(amp_values),
        angle_deg: Stats::from_values(angle_values),
    }
}

/// Classifier metrics summarized for the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierSummary {
    pub macro_precision: Scalar,
    pub macro_recall: Scalar,
    pub macro_f1: Option<Scalar>,
    pub accuracy: Scalar,
    pub per_class_precision: Vec<Scalar>,
    pub per_class_recall: Vec<Scalar>,
    pub per_class_f1_defined: Vec<bool>,
    pub n_samples: usize,
}

impl From<&Evaluation> for ClassifierSummary {
    fn from(e: &Evaluation) -> Self {
        ClassifierSummary {
            macro_precision: e.macro_precision,
            macro_recall: e.macro_recall,
            macro_f1: e.macro_f1,
            accuracy: e.accuracy,
            per_class_precision: e.per_class.iter().map(|m| m.precision).collect(),
            per_class_recall: e.per_class.iter().map(|m| m.recall).collect(),
            per_class_f1_defined: e.per_class.iter().map(|m| m.f1_defined).collect(),
            n_samples: e.n_samples,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    /// Case label, e.g. "non-attack" or "attack".
    pub label: String,
    /// Frame-pooled fidelity.
    pub fidelity: FidelityStats,
    /// Per-trace means of the same metrics, when trace structure exists.
    pub per_trace_cosine: Option<Stats>,
    pub per_trace_amplitude: Option<Stats>,
    pub classifier: Option<ClassifierSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: Vec<CaseReport>,
    pub provenance: Provenance,
}

fn fmt_opt(v: Option<Scalar>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "--".into(),
    }
}

/// Human-readable table: one row per case, mean with std beneath.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>12} {:>12} {:>12}",
        "Cases", "Cos. Sim.", "Amp. Rat.", "P", "R", "F1"
    );
    let _ = writeln!(out, "{}", "-".repeat(80));
    for case in &report.cases {
        let (p, r, f1) = match &case.classifier {
            Some(c) => (
                format!("{:.2}", c.macro_precision),
                format!("{:.2}", c.macro_recall),
                fmt_opt(c.macro_f1),
            ),
            None => ("--".into(), "--".into(), "--".into()),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>14} {:>12} {:>12} {:>12}",
            case.label,
            format!("{:.2}", case.fidelity.cosine_similarity.mean),
            format!("{:.2}", case.fidelity.amplitude_ratio.mean),
            p,
            r,
            f1
        );
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>14}",
            "",
            format!("({:.4})", case.fidelity.cosine_similarity.std),
            format!("({:.4})", case.fidelity.amplitude_ratio.std),
        );
    }
    let _ = writeln!(
        out,
        "\nseed={} config={} version={}",
        report.provenance.seed, report.provenance.config_hash, report.provenance.tool_version
    );
    out
}

/// Write the machine JSON and the text table.
pub fn emit_report(report: &MetricsReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let txt_path = dir.join("report.txt");
    fs::write(&txt_path, render_table(report)).map_err(|e| Error::io(&txt_path, e))?;
    Ok(())
}

/// Plot-ready CSV of a scenario trace: real force magnitude, spoofed
/// reading magnitude, and grip command per frame.
pub fn write_plot_csv(trace: &SimTrace, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    (|| -> std::io::Result<()> {
        writeln!(w, "frame,real_force_n,spoofed_force_n,grip_command_n")?;
        for s in &trace.frames {
            writeln!(
                w,
                "{},{},{},{}",
                s.frame_index,
                s.true_force.magnitude(),
                s.spoofed_reading.magnitude(),
                s.commanded_grip
            )?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ForceVec;
    use approx::assert_relative_eq;

    fn frame(true_z: Scalar, meas_z: Scalar) -> SensorFrame {
        SensorFrame {
            frame_index: 0,
            time: 0.0,
            true_force: ForceVec::new(0.0, 0.0, true_z),
            measured_force: ForceVec::new(0.0, 0.0, meas_z),
        }
    }

    #[test]
    fn identical_sequences_are_perfect() {
        let frames: Vec<_> = (1..100).map(|i| frame(i as f64, i as f64)).collect();
        let f = force_fidelity(&frames, DEGENERACY_EPSILON);
        assert_relative_eq!(f.cosine_similarity.mean, 1.0, max_relative = 1e-12);
        assert_eq!(f.cosine_similarity.std, 0.0);
        assert_relative_eq!(f.amplitude_ratio.mean, 1.0, max_relative = 1e-12);
        assert_eq!(f.angle_deg.mean, 0.0);
    }

    #[test]
    fn contact_free_frames_excluded() {
        let frames = vec![frame(0.0, 5.0), frame(1.0, 2.0)];
        let f = force_fidelity(&frames, DEGENERACY_EPSILON);
        assert_eq!(f.amplitude_ratio.count, 1);
        assert_relative_eq!(f.amplitude_ratio.mean, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn suppressed_frames_count_for_amplitude_only() {
        let frames = vec![frame(35.0, 0.0)];
        let f = force_fidelity(&frames, DEGENERACY_EPSILON);
        assert_eq!(f.amplitude_ratio.count, 1);
        assert_eq!(f.amplitude_ratio.mean, 0.0);
        assert_eq!(f.cosine_similarity.count, 0);
    }

    #[test]
    fn stats_population_std() {
        let s = Stats::from_values([1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(s.count, 2);
        assert_eq!((s.min, s.max), (1.0, 3.0));
    }

    #[test]
    fn report_json_round_trip() {
        let report = MetricsReport {
            cases: vec![CaseReport {
                label: "non-attack".into(),
                fidelity: force_fidelity(&[frame(1.0, 1.0)], DEGENERACY_EPSILON),
                per_trace_cosine: None,
                per_trace_amplitude: None,
                classifier: None,
            }],
            provenance: Provenance {
                seed: 42,
                config_hash: "abc".into(),
                tool_version: "0.1.0".into(),
            },
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn table_has_one_row_per_case() {
        let case = |label: &str| CaseReport {
            label: label.into(),
            fidelity: force_fidelity(&[frame(1.0, 1.0)], DEGENERACY_EPSILON),
            per_trace_cosine: None,
            per_trace_amplitude: None,
            classifier: None,
        };
        let report = MetricsReport {
            cases: vec![case("non-attack"), case("attack")],
            provenance: Provenance {
                seed: 0,
                config_hash: String::new(),
                tool_version: String::new(),
            },
        };
        let table = render_table(&report);
        assert!(table.contains("non-attack"));
        assert!(table.lines().any(|l| l.starts_with("attack")));
    }

    #[test]
    fn plot_csv_row_count_matches_trace() {
        use crate::grasp::{run_scenario, GraspScenario};
        use crate::sensor::SensorModel;
        let trace = run_scenario(&GraspScenario::default(), &SensorModel::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        write_plot_csv(&trace, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), trace.frames.len() + 1);
    }
}
