//! Force-fidelity metrics at the concrete scalar type, with the default
//! degeneracy epsilon applied.

use crate::vec3;
use crate::{ForceVec, Result, Scalar, DEGENERACY_EPSILON};

pub fn cosine_similarity(a: ForceVec, b: ForceVec) -> Result<Scalar> {
    vec3::cosine_similarity(a, b, DEGENERACY_EPSILON)
}

pub fn amplitude_ratio(gt: ForceVec, measured: ForceVec) -> Result<Scalar> {
    vec3::amplitude_ratio(gt, measured, DEGENERACY_EPSILON)
}

pub fn angle_between_deg(a: ForceVec, b: ForceVec) -> Result<Scalar> {
    vec3::angle_between_deg(a, b, DEGENERACY_EPSILON)
}
