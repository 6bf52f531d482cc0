//! Attack-profile calibration.
//!
//! Searches for emitter parameters whose perturbation reproduces the
//! target dataset-level amplitude ratio and cosine similarity on the
//! benign press protocol, while pushing every weight class's windowed
//! features out of its own learned region so the benign-trained
//! classifier mislabels all of them.
//!
//! The profile is an affine map of the normal axis plus a constant
//! lateral offset: `z' = gain_factor * z + offset_z`, `x' = x + offset_xy`,
//! `y' = y + offset_xy`, realized as a signed-gain layer followed by an
//! additive-offset layer. `gain_factor` must be negative: any monotone
//! (order-preserving) perturbation maps the heaviest class's features
//! beyond the training range, where trees still route to the heaviest
//! class and keep its recall at 1.

use serde::{Deserialize, Serialize};

use crate::datagen::PressProtocol;
use crate::emi::{self, AttackConfig, AttackLayer, CouplingModel, Envelope, PerturbMode};
use crate::error::{Error, Result};
use crate::{ForceVec, Scalar};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationTargets {
    pub amplitude_ratio: Scalar,
    pub cosine_similarity: Scalar,
    /// Tolerances used to weight the two objectives.
    pub amplitude_tolerance: Scalar,
    pub cosine_tolerance: Scalar,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            amplitude_ratio: 9.2,
            cosine_similarity: 0.56,
            amplitude_tolerance: 1.0,
            cosine_tolerance: 0.1,
        }
    }
}

/// The affine perturbation parameters in force units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineProfile {
    /// Multiplier applied to the normal (z) axis; negative inverts.
    pub gain_factor: Scalar,
    /// Constant offset on z, newtons.
    pub offset_z: Scalar,
    /// Constant offset on each of x and y, newtons.
    pub offset_xy: Scalar,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub profile: AffineProfile,
    pub layers: Vec<AttackLayer>,
    /// Predicted dataset-mean metrics at the class force levels.
    pub predicted_amplitude_ratio: Scalar,
    pub predicted_cosine_similarity: Scalar,
    pub targets: CalibrationTargets,
}

/// Midpoints between adjacent class force levels: the thresholds a
/// Gini-trained tree places between the tight per-class clusters.
fn class_boundaries(forces: &[Scalar]) -> Vec<Scalar> {
    forces.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
}

fn region_of(boundaries: &[Scalar], x: Scalar) -> usize {
    boundaries.iter().filter(|&&b| x >= b).count()
}

/// A feature image is safe for class `i` when it is not attributable to
/// class `i` and sits clear of every decision boundary.
fn image_safe(boundaries: &[Scalar], class: usize, x: Scalar, margin: Scalar) -> bool {
    if boundaries.iter().any(|&b| (x - b).abs() < margin) {
        return false;
    }
    region_of(boundaries, x) != class
}

fn misroutes_all_classes(
    forces: &[Scalar],
    boundaries: &[Scalar],
    p: &AffineProfile,
    margin: Scalar,
) -> bool {
    forces.iter().enumerate().all(|(i, &f)| {
        let u = p.gain_factor * f + p.offset_z;
        // Both signed (mean-like) and magnitude (RMS-like) feature images
        // must leave the class's own region.
        image_safe(boundaries, i, u, margin) && image_safe(boundaries, i, u.abs(), margin)
    })
}

fn predicted_metrics(forces: &[Scalar], p: &AffineProfile) -> (Scalar, Scalar) {
    let mut amp = 0.0;
    let mut cos = 0.0;
    for &f in forces {
        let u = p.gain_factor * f + p.offset_z;
        let mag = (2.0 * p.offset_xy * p.offset_xy + u * u).sqrt();
        amp += mag / f;
        cos += u / mag;
    }
    let n = forces.len() as Scalar;
    (amp / n, cos / n)
}

fn objective(targets: &CalibrationTargets, amp: Scalar, cos: Scalar) -> Scalar {
    let ea = (amp - targets.amplitude_ratio) / targets.amplitude_tolerance;
    let ec = (cos - targets.cosine_similarity) / targets.cosine_tolerance;
    ea * ea + ec * ec
}

/// Search the affine parameter space: coarse grid, then local refinement.
pub fn calibrate(
    protocol: &PressProtocol,
    coupling_template: &CouplingModel,
    targets: &CalibrationTargets,
) -> Result<CalibrationResult> {
    protocol.validate()?;
    let forces: Vec<Scalar> = (0..protocol.weight_classes_g.len())
        .map(|i| protocol.class_force_n(i))
        .collect();
    if forces.len() < 2 {
        return Err(Error::Calibration(
            "need at least two weight classes to calibrate".into(),
        ));
    }
    let boundaries = class_boundaries(&forces);
    let margin = 0.2;

    let eval = |p: &AffineProfile| -> Option<(Scalar, Scalar, Scalar)> {
        if !misroutes_all_classes(&forces, &boundaries, p, margin) {
            return None;
        }
        let (amp, cos) = predicted_metrics(&forces, p);
        Some((objective(targets, amp, cos), amp, cos))
    };

    let mut best: Option<(Scalar, AffineProfile, Scalar, Scalar)> = None;
    let consider = |p: AffineProfile, best: &mut Option<(Scalar, AffineProfile, Scalar, Scalar)>| {
        if let Some((err, amp, cos)) = eval(&p) {
            if best.is_none_or(|(b, _, _, _)| err < b) {
                *best = Some((err, p, amp, cos));
            }
        }
    };

    let max_force = forces.last().copied().unwrap_or(1.0);
    // Coarse grid.
    let mut b = -3.0;
    while b <= -0.2 {
        let mut a = 0.0;
        while a <= 3.0 * max_force {
            let mut v = 0.0;
            while v <= 1.5 * max_force {
                consider(
                    AffineProfile {
                        gain_factor: b,
                        offset_z: a,
                        offset_xy: v,
                    },
                    &mut best,
                );
                v += 0.3;
            }
            a += 0.3;
        }
        b += 0.1;
    }
    let (_, coarse, _, _) =
        best.ok_or_else(|| Error::Calibration("no feasible perturbation found".into()))?;

    // Refine around the coarse optimum.
    let mut refined = best;
    for db in -10..=10 {
        for da in -10..=10 {
            for dv in -10..=10 {
                consider(
                    AffineProfile {
                        gain_factor: coarse.gain_factor + 0.01 * db as Scalar,
                        offset_z: coarse.offset_z + 0.03 * da as Scalar,
                        offset_xy: coarse.offset_xy + 0.03 * dv as Scalar,
                    },
                    &mut refined,
                );
            }
        }
    }
    let (_, profile, amp, cos) = refined.unwrap();

    Ok(CalibrationResult {
        layers: profile_layers(&profile, coupling_template),
        profile,
        predicted_amplitude_ratio: amp,
        predicted_cosine_similarity: cos,
        targets: targets.clone(),
    })
}

/// Realize the affine profile as emitter layers on the coupling model:
/// a signed z gain followed by an additive offset, both on resonance at
/// the reference distance so `A = peak_gain * power`.
pub fn profile_layers(profile: &AffineProfile, template: &CouplingModel) -> Vec<AttackLayer> {
    let schedule = AttackConfig {
        carrier_freq: template.resonant_freq,
        emitter_power: 0.0,
        standoff_distance: template.reference_distance,
        start_frame: 0,
        end_frame: emi::ALWAYS_ON_END_FRAME,
        envelope: Envelope::Constant,
    };

    // Layer 1: z' = (1 + A1 * dz) z with dz = -1 => factor 1 - A1.
    let gain_amplitude = 1.0 - profile.gain_factor;
    let gain_layer = AttackLayer {
        coupling: CouplingModel {
            coupling_direction: ForceVec::new(0.0, 0.0, -1.0),
            mode: PerturbMode::SignedGain,
            ..template.clone()
        },
        attack: AttackConfig {
            emitter_power: gain_amplitude / template.peak_gain,
            ..schedule.clone()
        },
    };

    // Layer 2: additive offset (v, v, a).
    let offset = ForceVec::new(profile.offset_xy, profile.offset_xy, profile.offset_z);
    let amplitude = offset.magnitude();
    let direction = if amplitude > 0.0 {
        offset.scale(1.0 / amplitude)
    } else {
        ForceVec::new(0.0, 0.0, 1.0)
    };
    let offset_layer = AttackLayer {
        coupling: CouplingModel {
            coupling_direction: direction,
            mode: PerturbMode::AdditiveOffset,
            ..template.clone()
        },
        attack: AttackConfig {
            emitter_power: amplitude / template.peak_gain,
            ..schedule
        },
    };

    vec![gain_layer, offset_layer]
}
