//! EMI coupling and perturbation injection.
//!
//! An emitter configuration (carrier frequency, power, standoff, schedule)
//! is converted into per-frame perturbations of the sensor reading through
//! a single-pole Lorentzian resonance with near-field distance decay. The
//! carrier itself is never simulated per sample: at kHz sampling it
//! aliases away, and only the rectified envelope effect on the digital
//! output is modeled.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::SensorFrame;
use crate::{ForceVec, Scalar};

/// Lorentzian resonance shape `L(f) = 1 / (1 + Q^2 (f/f0 - f0/f)^2)`,
/// normalized so `L(f0) = 1`.
pub fn lorentzian<F: Float>(freq: F, resonant_freq: F, quality_factor: F) -> F {
    let r = freq / resonant_freq - resonant_freq / freq;
    F::one() / (F::one() + quality_factor * quality_factor * r * r)
}

/// How an induced envelope of strength `A` (newtons) maps onto the
/// 3-axis reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// `measured + A * direction`.
    AdditiveOffset,
    /// Per-axis scaling by `1 + A * |direction_axis|`.
    ChannelGain,
    /// `measured * max(0, 1 - A)`; drives the reading to zero for A >= 1.
    Suppression,
    /// Per-axis scaling by `1 + A * direction_axis` with signed
    /// components, so a strongly coupled axis can be inverted.
    SignedGain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingModel {
    /// Hz.
    pub resonant_freq: Scalar,
    pub quality_factor: Scalar,
    /// Newtons per watt at the reference distance, on resonance.
    pub peak_gain: Scalar,
    pub path_loss_exponent: Scalar,
    /// Meters.
    pub reference_distance: Scalar,
    /// Unit vector: axis mix the induced signal projects onto.
    pub coupling_direction: ForceVec,
    pub mode: PerturbMode,
}

impl Default for CouplingModel {
    fn default() -> Self {
        CouplingModel {
            resonant_freq: 313e6,
            quality_factor: 40.0,
            peak_gain: 2.0,
            path_loss_exponent: 3.0,
            reference_distance: 0.005,
            coupling_direction: ForceVec::new(0.0, 0.0, 1.0),
            mode: PerturbMode::Suppression,
        }
    }
}

impl CouplingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.resonant_freq > 0.0) {
            return Err(Error::Invariant(format!(
                "resonant_freq must be > 0, got {}",
                self.resonant_freq
            )));
        }
        if !(self.quality_factor > 0.0) || self.path_loss_exponent < 0.0 {
            return Err(Error::Invariant(
                "quality_factor must be > 0 and path_loss_exponent >= 0".into(),
            ));
        }
        let mag = self.coupling_direction.magnitude();
        if (mag - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!(
                "coupling_direction must be unit magnitude, got {mag}"
            )));
        }
        Ok(())
    }

    /// Envelope gain in newtons per watt at `freq` and `distance`.
    pub fn coupling_gain(&self, freq: Scalar, distance: Scalar) -> Scalar {
        self.peak_gain
            * lorentzian(freq, self.resonant_freq, self.quality_factor)
            * (self.reference_distance / distance).powf(self.path_loss_exponent)
    }
}

/// Attack schedule envelope, in frames relative to `start_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Envelope {
    Constant,
    OnOffKeyed { period_frames: u64, duty: Scalar },
}

/// "Never ends" sentinel kept within the TOML integer range.
pub const ALWAYS_ON_END_FRAME: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Hz.
    pub carrier_freq: Scalar,
    /// Watts.
    pub emitter_power: Scalar,
    /// Meters.
    pub standoff_distance: Scalar,
    pub start_frame: u64,
    pub end_frame: u64,
    pub envelope: Envelope,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            carrier_freq: 313e6,
            emitter_power: 1.0,
            standoff_distance: 0.005,
            start_frame: 0,
            end_frame: ALWAYS_ON_END_FRAME,
            envelope: Envelope::Constant,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.start_frame > self.end_frame {
            return Err(Error::Invariant(format!(
                "attack start_frame {} > end_frame {}",
                self.start_frame, self.end_frame
            )));
        }
        if self.emitter_power < 0.0 {
            return Err(Error::Invariant("emitter_power must be >= 0".into()));
        }
        if !(self.standoff_distance > 0.0) {
            return Err(Error::Invariant("standoff_distance must be > 0".into()));
        }
        if let Envelope::OnOffKeyed { period_frames, duty } = self.envelope {
            if period_frames == 0 || !(0.0..=1.0).contains(&duty) {
                return Err(Error::Invariant(
                    "on_off_keyed envelope needs period_frames > 0 and duty in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether the emitter is on at this frame (schedule and envelope).
    pub fn active_at(&self, frame_index: u64) -> bool {
        if frame_index < self.start_frame || frame_index > self.end_frame {
            return false;
        }
        match self.envelope {
            Envelope::Constant => true,
            Envelope::OnOffKeyed { period_frames, duty } => {
                let phase = (frame_index - self.start_frame) % period_frames;
                let on = (period_frames as Scalar * duty).round() as u64;
                phase < on
            }
        }
    }
}

/// One coupling model driven by one attack configuration. The calibrated
/// profile stacks several layers applied in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackLayer {
    #[serde(default)]
    pub coupling: CouplingModel,
    #[serde(default)]
    pub attack: AttackConfig,
}

/// Perturb one frame's reading. Outside the schedule (or with the
/// envelope off) the reading passes through bit-exact; the result is
/// re-clamped to `saturation` per axis.
pub fn perturb(
    coupling: &CouplingModel,
    attack: &AttackConfig,
    frame: &SensorFrame,
    saturation: Scalar,
) -> ForceVec {
    if !attack.active_at(frame.frame_index) {
        return frame.measured_force;
    }
    let amplitude = coupling.coupling_gain(attack.carrier_freq, attack.standoff_distance)
        * attack.emitter_power;
    if amplitude == 0.0 {
        return frame.measured_force;
    }
    let m = frame.measured_force;
    let d = coupling.coupling_direction;
    let out = match coupling.mode {
        PerturbMode::AdditiveOffset => m + d.scale(amplitude),
        PerturbMode::ChannelGain => ForceVec::new(
            m.x * (1.0 + amplitude * d.x.abs()),
            m.y * (1.0 + amplitude * d.y.abs()),
            m.z * (1.0 + amplitude * d.z.abs()),
        ),
        PerturbMode::Suppression => m.scale((1.0 - amplitude).max(0.0)),
        PerturbMode::SignedGain => ForceVec::new(
            m.x * (1.0 + amplitude * d.x),
            m.y * (1.0 + amplitude * d.y),
            m.z * (1.0 + amplitude * d.z),
        ),
    };
    ForceVec::new(
        out.x.clamp(-saturation, saturation),
        out.y.clamp(-saturation, saturation),
        out.z.clamp(-saturation, saturation),
    )
}

/// Fold a stack of attack layers over one frame.
pub fn perturb_layers(
    layers: &[AttackLayer],
    frame: &SensorFrame,
    saturation: Scalar,
) -> ForceVec {
    let mut current = *frame;
    for layer in layers {
        current.measured_force = perturb(&layer.coupling, &layer.attack, &current, saturation);
    }
    current.measured_force
}

/// Apply attack layers in place over a whole trace.
pub fn apply_attack(frames: &mut [SensorFrame], layers: &[AttackLayer], saturation: Scalar) {
    for frame in frames.iter_mut() {
        frame.measured_force = perturb_layers(layers, frame, saturation);
    }
}

/// Characterize the resonance: evaluate the coupling response over
/// `[f_start, f_end]` in steps of `step` and return the argmax frequency
/// (ties toward lower frequency) plus the full response curve.
pub fn frequency_sweep(
    coupling: &CouplingModel,
    f_start: Scalar,
    f_end: Scalar,
    step: Scalar,
    probe_distance: Scalar,
) -> Result<(Scalar, Vec<(Scalar, Scalar)>)> {
    if !(f_start < f_end) || !(step > 0.0) {
        return Err(Error::InvalidSweep(format!(
            "need f_start < f_end and step > 0 (got {f_start}, {f_end}, {step})"
        )));
    }
    let mut curve = Vec::new();
    let mut i = 0u64;
    loop {
        let f = f_start + step * i as Scalar;
        if f > f_end {
            break;
        }
        curve.push((f, coupling.coupling_gain(f, probe_distance)));
        i += 1;
    }
    if curve.is_empty() {
        return Err(Error::InvalidSweep("sweep contains no points".into()));
    }
    let mut best = curve[0];
    for &(f, g) in &curve[1..] {
        if g > best.1 {
            best = (f, g);
        }
    }
    Ok((best.0, curve))
}
