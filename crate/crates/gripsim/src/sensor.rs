//! Forward model of the Hall-effect fingertip sensor.
//!
//! The sensor is treated as a force-in / reading-out transducer: per-axis
//! gain, additive Gaussian noise, symmetric saturation, and quantization,
//! sampled at a fixed rate. Hall physics (magnet displacement, field,
//! voltage) is below this abstraction level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::{ForceVec, Scalar};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// Samples per second.
    pub sample_rate: Scalar,
    /// Per-axis additive Gaussian noise, newtons (std).
    pub noise_sigma: Scalar,
    /// Symmetric per-axis clamp, newtons.
    pub saturation: Scalar,
    /// Reading resolution, newtons. Zero disables quantization.
    pub quantization_step: Scalar,
    /// Per-axis gain, nominal 1.0.
    pub axis_gain: [Scalar; 3],
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            sample_rate: 1000.0,
            noise_sigma: 0.01,
            saturation: 100.0,
            quantization_step: 0.001,
            axis_gain: [1.0, 1.0, 1.0],
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Invariant(format!(
                "sensor sample_rate must be > 0, got {}",
                self.sample_rate
            )));
        }
        if self.noise_sigma < 0.0 || self.quantization_step < 0.0 {
            return Err(Error::Invariant(
                "sensor noise_sigma and quantization_step must be >= 0".into(),
            ));
        }
        if !(self.saturation > 0.0) {
            return Err(Error::Invariant(format!(
                "sensor saturation must be > 0, got {}",
                self.saturation
            )));
        }
        Ok(())
    }

    pub fn clamp_axis(&self, v: Scalar) -> Scalar {
        v.clamp(-self.saturation, self.saturation)
    }

    pub fn clamp(&self, f: ForceVec) -> ForceVec {
        ForceVec::new(
            self.clamp_axis(f.x),
            self.clamp_axis(f.y),
            self.clamp_axis(f.z),
        )
    }

    fn quantize(&self, v: Scalar) -> Scalar {
        if self.quantization_step > 0.0 {
            (v / self.quantization_step).round() * self.quantization_step
        } else {
            v
        }
    }

    /// One reading: per axis `gain*F + N(0, sigma)`, clamped to
    /// saturation, then rounded to the quantization step.
    pub fn transduce(&self, true_force: ForceVec, rng: &mut RngStream) -> ForceVec {
        let mut out = [0.0; 3];
        for (i, (f, g)) in true_force
            .as_array()
            .iter()
            .zip(self.axis_gain.iter())
            .enumerate()
        {
            let noise = if self.noise_sigma > 0.0 {
                self.noise_sigma * rng.next_gaussian()
            } else {
                // Keep the draw count fixed so traces with and without
                // noise consume the stream identically.
                0.0
            };
            out[i] = self.quantize(self.clamp_axis(g * f + noise));
        }
        ForceVec::new(out[0], out[1], out[2])
    }

    /// Sample `force_fn` for `duration` seconds. Frame `i` holds the true
    /// force at `i / sample_rate` and its transduction.
    pub fn sample_trace(
        &self,
        force_fn: impl Fn(Scalar) -> ForceVec,
        duration: Scalar,
        rng: &mut RngStream,
    ) -> Result<Vec<SensorFrame>> {
        self.validate()?;
        let n = (duration * self.sample_rate).floor() as i64;
        if n < 1 {
            return Err(Error::EmptyTrace { duration });
        }
        let mut frames = Vec::with_capacity(n as usize);
        for i in 0..n as u64 {
            let time = i as Scalar / self.sample_rate;
            let true_force = force_fn(time);
            let measured = self.transduce(true_force, rng);
            frames.push(SensorFrame {
                frame_index: i,
                time,
                true_force,
                measured_force: measured,
            });
        }
        Ok(frames)
    }
}

/// One timestamped sample pairing ground truth with the reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub frame_index: u64,
    pub time: Scalar,
    pub true_force: ForceVec,
    pub measured_force: ForceVec,
}
