//! Baseline signal-level anomaly detector.
//!
//! Two plausibility rules over the measured force stream: a per-frame
//! slew limit (forces cannot jump arbitrarily fast) and an absolute
//! magnitude cap. Raw rule hits are persisted for a short window so a
//! recurring condition reads as one contiguous flagged region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::SensorFrame;
use crate::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Max plausible change of the reading between frames, newtons.
    pub jump_threshold: Scalar,
    /// Max physically plausible reading magnitude, newtons.
    pub plausibility_max: Scalar,
    /// Frames a raw hit keeps the flag asserted.
    pub persistence_window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            jump_threshold: 5.0,
            plausibility_max: 100.0,
            persistence_window: 10,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jump_threshold > 0.0)
            || !(self.plausibility_max > 0.0)
            || self.persistence_window == 0
        {
            return Err(Error::Invariant(
                "detector thresholds and persistence_window must be > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionSummary {
    /// Frame index of the first flag, if any.
    pub first_flag: Option<u64>,
    pub flagged_fraction: Scalar,
    pub n_flagged: usize,
    pub n_frames: usize,
}

#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub flags: Vec<bool>,
    pub summary: DetectionSummary,
}

/// Flag frames whose reading jumps faster than `jump_threshold` per frame
/// or exceeds `plausibility_max` in magnitude; flags persist for
/// `persistence_window` frames after each raw hit.
pub fn detect(trace: &[SensorFrame], config: &DetectorConfig) -> Result<DetectionResult> {
    config.validate()?;
    if trace.is_empty() {
        return Err(Error::Invariant("detector needs a non-empty trace".into()));
    }
    let n = trace.len();
    let mut raw = vec![false; n];
    for i in 0..n {
        let m = trace[i].measured_force;
        if m.magnitude() > config.plausibility_max {
            raw[i] = true;
        }
        if i > 0 {
            let jump = (m - trace[i - 1].measured_force).magnitude();
            if jump > config.jump_threshold {
                raw[i] = true;
            }
        }
    }
    let mut flags = vec![false; n];
    let mut hold = 0usize;
    for i in 0..n {
        if raw[i] {
            hold = config.persistence_window;
        }
        if hold > 0 {
            flags[i] = true;
            hold -= 1;
        }
    }
    let n_flagged = flags.iter().filter(|&&f| f).count();
    let first_flag = flags
        .iter()
        .position(|&f| f)
        .map(|i| trace[i].frame_index);
    Ok(DetectionResult {
        summary: DetectionSummary {
            first_flag,
            flagged_fraction: n_flagged as Scalar / n as Scalar,
            n_flagged,
            n_frames: n,
        },
        flags,
    })
}
