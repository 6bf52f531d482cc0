//! Simulation testbed for intentional EMI against Hall-effect fingertip
//! force sensors.
//!
//! The pipeline runs end-to-end in software: a contact-force profile is
//! transduced by a noisy sensor model, optionally perturbed by a resonant
//! EMI coupling model, and the corrupted readings drive force-fidelity
//! metrics, a windowed random-forest weight classifier, a closed-loop
//! grip controller, and a baseline signal-level anomaly detector.
//!
//! Core vector math and the coupling resonance are generic over the
//! scalar type via `num-traits`; the simulation layers use the concrete
//! [`Scalar`] alias (`f64`).

// Validation uses `!(x > 0.0)` on purpose: it rejects NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod config;
pub mod datagen;
pub mod detect;
pub mod emi;
pub mod error;
pub mod grasp;
pub mod learn;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod sensor;
pub mod vec3;

/// Scalar type used by the concrete simulation layers.
pub type Scalar = f64;

/// 3-axis contact force in newtons.
pub type ForceVec = vec3::Vec3<Scalar>;

/// Magnitudes below this are treated as directionless (newtons).
pub const DEGENERACY_EPSILON: Scalar = 1e-9;

/// Standard gravity, m/s^2.
pub const GRAVITY: Scalar = 9.81;

pub use error::{Error, Result};
pub use rng::RngStream;
