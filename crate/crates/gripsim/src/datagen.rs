//! Synthetic calibration-weight press protocol.
//!
//! Each trace presses one discrete weight onto the sensor: a half-cosine
//! ramp up, a dwell at `m*g`, and a half-cosine release, with a small
//! per-trace contact-angle jitter. Attacked variants apply the EMI
//! perturbation to every frame while sharing the benign ground truth.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emi::{self, AttackLayer};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sensor::{SensorFrame, SensorModel};
use crate::{ForceVec, Scalar, GRAVITY};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PressProtocol {
    /// Masses in grams, strictly increasing.
    pub weight_classes_g: Vec<Scalar>,
    pub press_duration: Scalar,
    pub dwell_duration: Scalar,
    pub release_duration: Scalar,
    pub repetitions: usize,
    /// Std of the per-trace contact direction tilt, degrees.
    pub contact_angle_jitter_deg: Scalar,
    /// Std of the per-trace dwell magnitude jitter, relative.
    pub magnitude_jitter: Scalar,
    /// Stratified train fraction of the split.
    pub train_fraction: Scalar,
    pub seed: u64,
}

impl Default for PressProtocol {
    fn default() -> Self {
        PressProtocol {
            weight_classes_g: vec![50.0, 100.0, 200.0, 500.0, 1000.0],
            press_duration: 0.3,
            dwell_duration: 1.0,
            release_duration: 0.3,
            repetitions: 40,
            contact_angle_jitter_deg: 2.0,
            magnitude_jitter: 0.002,
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

impl PressProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.weight_classes_g.is_empty() {
            return Err(Error::Invariant("weight_classes_g must be non-empty".into()));
        }
        if !self
            .weight_classes_g
            .windows(2)
            .all(|w| w[0] < w[1] && w[0] > 0.0)
            || self.weight_classes_g[0] <= 0.0
        {
            return Err(Error::Invariant(
                "weight_classes_g must be strictly increasing and > 0".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::Invariant("repetitions must be > 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Invariant("train_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn class_force_n(&self, class_index: usize) -> Scalar {
        self.weight_classes_g[class_index] / 1000.0 * GRAVITY
    }

    pub fn total_duration(&self) -> Scalar {
        self.press_duration + self.dwell_duration + self.release_duration
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledTrace {
    pub frames: Vec<SensorFrame>,
    /// Index into `weight_classes_g`.
    pub label: usize,
    pub class_mass_g: Scalar,
    pub rep: usize,
    pub press_frames: usize,
    pub dwell_frames: usize,
    pub release_frames: usize,
}

impl LabeledTrace {
    /// Frames of the constant-force dwell phase.
    pub fn dwell_frames(&self) -> &[SensorFrame] {
        let start = self.press_frames;
        let end = (start + self.dwell_frames).min(self.frames.len());
        &self.frames[start..end]
    }
}

/// One press of class `class_index`, repetition `rep_index`.
pub fn generate_press(
    protocol: &PressProtocol,
    class_index: usize,
    rep_index: usize,
    sensor: &SensorModel,
    rng: &RngStream,
) -> Result<LabeledTrace> {
    protocol.validate()?;
    if class_index >= protocol.weight_classes_g.len() {
        return Err(Error::Invariant(format!(
            "class_index {class_index} out of range"
        )));
    }
    let mut stream = rng.derive(&format!("press-{class_index}-{rep_index}"));

    // Per-trace contact direction: near-vertical, tilted by the jitter.
    let tilt = (protocol.contact_angle_jitter_deg * stream.next_gaussian()).to_radians();
    let azimuth = stream.next_range(0.0, 2.0 * std::f64::consts::PI);
    let direction = ForceVec::new(
        tilt.sin() * azimuth.cos(),
        tilt.sin() * azimuth.sin(),
        tilt.cos(),
    );
    let peak = protocol.class_force_n(class_index)
        * (1.0 + protocol.magnitude_jitter * stream.next_gaussian());

    let press = protocol.press_duration;
    let dwell = protocol.dwell_duration;
    let release = protocol.release_duration;
    let total = protocol.total_duration();
    let profile = move |t: Scalar| -> ForceVec {
        let magnitude = if t < press {
            peak * 0.5 * (1.0 - (std::f64::consts::PI * t / press).cos())
        } else if t < press + dwell {
            peak
        } else if t < total {
            let u = (t - press - dwell) / release;
            peak * 0.5 * (1.0 + (std::f64::consts::PI * u).cos())
        } else {
            0.0
        };
        direction.scale(magnitude)
    };

    let frames = sensor.sample_trace(profile, total, &mut stream)?;
    Ok(LabeledTrace {
        frames,
        label: class_index,
        class_mass_g: protocol.weight_classes_g[class_index],
        rep: rep_index,
        press_frames: (press * sensor.sample_rate).floor() as usize,
        dwell_frames: (dwell * sensor.sample_rate).floor() as usize,
        release_frames: (release * sensor.sample_rate).floor() as usize,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub protocol: PressProtocol,
    pub traces: Vec<LabeledTrace>,
    /// Indices into `traces`, stratified by class.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub attacked: bool,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.protocol.weight_classes_g.len()
    }

    pub fn train(&self) -> impl Iterator<Item = &LabeledTrace> {
        self.train_indices.iter().map(|&i| &self.traces[i])
    }

    pub fn test(&self) -> impl Iterator<Item = &LabeledTrace> {
        self.test_indices.iter().map(|&i| &self.traces[i])
    }
}

/// Generate all classes x repetitions; if attack layers are given, every
/// frame's reading is perturbed (the attack window spans the trace).
pub fn build_dataset(
    protocol: &PressProtocol,
    sensor: &SensorModel,
    attack: &[AttackLayer],
) -> Result<Dataset> {
    protocol.validate()?;
    sensor.validate()?;
    let root = RngStream::new(protocol.seed, "datagen");
    let n_classes = protocol.weight_classes_g.len();

    let mut traces = Vec::with_capacity(n_classes * protocol.repetitions);
    for class_index in 0..n_classes {
        for rep_index in 0..protocol.repetitions {
            let mut trace = generate_press(protocol, class_index, rep_index, sensor, &root)?;
            if !attack.is_empty() {
                emi::apply_attack(&mut trace.frames, attack, sensor.saturation);
            }
            traces.push(trace);
        }
    }

    // Stratified split from a seeded shuffle, recorded in the dataset.
    let mut split_rng = root.derive("split");
    let n_train_per_class =
        ((protocol.repetitions as Scalar) * protocol.train_fraction).round() as usize;
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for class_index in 0..n_classes {
        let base = class_index * protocol.repetitions;
        let order = split_rng.shuffled_indices(protocol.repetitions);
        for (k, &r) in order.iter().enumerate() {
            if k < n_train_per_class {
                train_indices.push(base + r);
            } else {
                test_indices.push(base + r);
            }
        }
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();

    Ok(Dataset {
        protocol: protocol.clone(),
        traces,
        train_indices,
        test_indices,
        attacked: !attack.is_empty(),
    })
}

const TRACE_HEADER: &str = "frame,time_s,true_fx,true_fy,true_fz,meas_fx,meas_fy,meas_fz";

#[derive(Debug, Serialize, Deserialize)]
struct ManifestTrace {
    file: String,
    label: usize,
    class_mass_g: Scalar,
    rep: usize,
    press_frames: usize,
    dwell_frames: usize,
    release_frames: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    protocol: PressProtocol,
    attacked: bool,
    traces: Vec<ManifestTrace>,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
}

/// Persist as a directory: `manifest.json` plus one CSV per trace.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest_traces = Vec::with_capacity(dataset.traces.len());
    for (i, trace) in dataset.traces.iter().enumerate() {
        let file = format!("trace-{i:04}.csv");
        let path = dir.join(&file);
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        (|| -> std::io::Result<()> {
            writeln!(w, "{TRACE_HEADER}")?;
            for s in &trace.frames {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.frame_index,
                    s.time,
                    s.true_force.x,
                    s.true_force.y,
                    s.true_force.z,
                    s.measured_force.x,
                    s.measured_force.y,
                    s.measured_force.z,
                )?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(&path, e))?;
        manifest_traces.push(ManifestTrace {
            file,
            label: trace.label,
            class_mass_g: trace.class_mass_g,
            rep: trace.rep,
            press_frames: trace.press_frames,
            dwell_frames: trace.dwell_frames,
            release_frames: trace.release_frames,
        });
    }
    let manifest = Manifest {
        protocol: dataset.protocol.clone(),
        attacked: dataset.attacked,
        traces: manifest_traces,
        train_indices: dataset.train_indices.clone(),
        test_indices: dataset.test_indices.clone(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest parse: {e}")))?;
    let mut traces = Vec::with_capacity(manifest.traces.len());
    for mt in &manifest.traces {
        let path = dir.join(&mt.file);
        let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut frames = Vec::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Config(format!(
                    "{}: line {} has {} fields, expected 8",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<Scalar> {
                fields[i].parse().map_err(|e| {
                    Error::Config(format!("{}: line {}: {e}", path.display(), lineno + 1))
                })
            };
            frames.push(SensorFrame {
                frame_index: fields[0].parse().map_err(|e| {
                    Error::Config(format!("{}: line {}: {e}", path.display(), lineno + 1))
                })?,
                time: num(1)?,
                true_force: ForceVec::new(num(2)?, num(3)?, num(4)?),
                measured_force: ForceVec::new(num(5)?, num(6)?, num(7)?),
            });
        }
        traces.push(LabeledTrace {
            frames,
            label: mt.label,
            class_mass_g: mt.class_mass_g,
            rep: mt.rep,
            press_frames: mt.press_frames,
            dwell_frames: mt.dwell_frames,
            release_frames: mt.release_frames,
        });
    }
    Ok(Dataset {
        protocol: manifest.protocol,
        traces,
        train_indices: manifest.train_indices,
        test_indices: manifest.test_indices,
        attacked: manifest.attacked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_protocol() -> PressProtocol {
        PressProtocol {
            repetitions: 4,
            ..PressProtocol::default()
        }
    }

    fn noiseless_sensor() -> SensorModel {
        SensorModel {
            noise_sigma: 0.0,
            quantization_step: 0.0,
            ..SensorModel::default()
        }
    }

    #[test]
    fn dwell_force_is_m_times_g() {
        let protocol = PressProtocol {
            contact_angle_jitter_deg: 0.0,
            magnitude_jitter: 0.0,
            ..PressProtocol::default()
        };
        let sensor = noiseless_sensor();
        let rng = RngStream::new(1, "t");
        // 100 g class.
        let trace = generate_press(&protocol, 1, 0, &sensor, &rng).unwrap();
        for f in trace.dwell_frames() {
            assert_relative_eq!(f.true_force.magnitude(), 0.981, max_relative = 1e-9);
            assert_eq!(f.true_force, f.measured_force);
        }
    }

    #[test]
    fn zero_jitter_dwell_is_constant() {
        let protocol = PressProtocol {
            contact_angle_jitter_deg: 0.0,
            magnitude_jitter: 0.0,
            ..PressProtocol::default()
        };
        let sensor = noiseless_sensor();
        let rng = RngStream::new(1, "t");
        let trace = generate_press(&protocol, 0, 0, &sensor, &rng).unwrap();
        let dwell = trace.dwell_frames();
        assert!(dwell.iter().all(|f| f.measured_force == dwell[0].measured_force));
    }

    #[test]
    fn dataset_counts_and_balance() {
        let protocol = PressProtocol {
            repetitions: 20,
            ..PressProtocol::default()
        };
        let ds = build_dataset(&protocol, &SensorModel::default(), &[]).unwrap();
        assert_eq!(ds.traces.len(), 100);
        for c in 0..5 {
            assert_eq!(ds.traces.iter().filter(|t| t.label == c).count(), 20);
            assert_eq!(
                ds.train()
                    .filter(|t| t.label == c)
                    .count(),
                14
            );
            assert_eq!(ds.test().filter(|t| t.label == c).count(), 6);
        }
    }

    #[test]
    fn same_seed_identical_datasets() {
        let protocol = small_protocol();
        let sensor = SensorModel::default();
        let a = build_dataset(&protocol, &sensor, &[]).unwrap();
        let b = build_dataset(&protocol, &sensor, &[]).unwrap();
        assert_eq!(a.train_indices, b.train_indices);
        for (ta, tb) in a.traces.iter().zip(&b.traces) {
            assert_eq!(ta.frames, tb.frames);
        }
    }

    #[test]
    fn attack_preserves_ground_truth() {
        use crate::emi::{AttackConfig, AttackLayer, CouplingModel, PerturbMode};
        let protocol = small_protocol();
        let sensor = SensorModel::default();
        let benign = build_dataset(&protocol, &sensor, &[]).unwrap();
        let layers = vec![AttackLayer {
            coupling: CouplingModel {
                mode: PerturbMode::AdditiveOffset,
                ..CouplingModel::default()
            },
            attack: AttackConfig::default(),
        }];
        let attacked = build_dataset(&protocol, &sensor, &layers).unwrap();
        for (b, a) in benign.traces.iter().zip(&attacked.traces) {
            for (fb, fa) in b.frames.iter().zip(&a.frames) {
                assert_eq!(fb.true_force, fa.true_force);
            }
            assert!(b
                .dwell_frames()
                .iter()
                .zip(a.dwell_frames())
                .all(|(fb, fa)| fb.measured_force != fa.measured_force));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let protocol = PressProtocol {
            repetitions: 2,
            weight_classes_g: vec![50.0, 100.0],
            ..PressProtocol::default()
        };
        let ds = build_dataset(&protocol, &SensorModel::default(), &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.traces.len(), ds.traces.len());
        assert_eq!(loaded.train_indices, ds.train_indices);
        for (a, b) in ds.traces.iter().zip(&loaded.traces) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.frames.len(), b.frames.len());
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                assert_eq!(fa.measured_force, fb.measured_force);
            }
        }
    }

    #[test]
    fn invalid_protocol_rejected() {
        let protocol = PressProtocol {
            weight_classes_g: vec![100.0, 50.0],
            ..PressProtocol::default()
        };
        assert!(build_dataset(&protocol, &SensorModel::default(), &[]).is_err());
    }
}
