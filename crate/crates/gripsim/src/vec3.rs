//! 3-component vector math, generic over the scalar type.
//!
//! Only what the force pipeline needs; this is not a general
//! linear-algebra layer.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<F> {
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Float> Vec3<F> {
    pub fn new(x: F, y: F, z: F) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(F::zero(), F::zero(), F::zero())
    }

    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn magnitude(self) -> F {
        self.dot(self).sqrt()
    }

    pub fn scale(self, k: F) -> Self {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self, epsilon: F) -> Result<Self> {
        let mag = self.magnitude();
        if mag <= epsilon {
            return Err(degenerate(mag, epsilon));
        }
        Ok(self.scale(F::one() / mag))
    }

    pub fn as_array(self) -> [F; 3] {
        [self.x, self.y, self.z]
    }
}

impl<F: Float> std::ops::Add for Vec3<F> {
    type Output = Self;
    fn add(self, other: Self) -> Self {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }
}

impl<F: Float> std::ops::Sub for Vec3<F> {
    type Output = Self;
    fn sub(self, other: Self) -> Self {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }
}

fn degenerate<F: Float>(magnitude: F, epsilon: F) -> Error {
    Error::DegenerateVector {
        magnitude: magnitude.to_f64().unwrap_or(f64::NAN),
        epsilon: epsilon.to_f64().unwrap_or(f64::NAN),
    }
}

/// Angular alignment of two vectors: `(a.b)/(|a||b|)`, clamped to
/// `[-1, 1]` so rounding overshoot cannot produce NaN downstream.
pub fn cosine_similarity<F: Float>(a: Vec3<F>, b: Vec3<F>, epsilon: F) -> Result<F> {
    let ma = a.magnitude();
    if ma <= epsilon {
        return Err(degenerate(ma, epsilon));
    }
    let mb = b.magnitude();
    if mb <= epsilon {
        return Err(degenerate(mb, epsilon));
    }
    let c = a.dot(b) / (ma * mb);
    Ok(c.min(F::one()).max(-F::one()))
}

/// Magnitude ratio `|measured| / |ground truth|`; >1 is amplification,
/// <1 attenuation.
pub fn amplitude_ratio<F: Float>(gt: Vec3<F>, measured: Vec3<F>, epsilon: F) -> Result<F> {
    let mg = gt.magnitude();
    if mg <= epsilon {
        return Err(degenerate(mg, epsilon));
    }
    Ok(measured.magnitude() / mg)
}

/// Angle between two vectors in degrees, in `[0, 180]`.
pub fn angle_between_deg<F: Float>(a: Vec3<F>, b: Vec3<F>, epsilon: F) -> Result<F> {
    let c = cosine_similarity(a, b, epsilon)?;
    Ok(c.acos().to_degrees())
}
