//! TOML run configuration: one file drives the whole pipeline, every
//! section optional and defaulted.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::CalibrationTargets;
use crate::datagen::PressProtocol;
use crate::detect::DetectorConfig;
use crate::emi::{AttackLayer, CouplingModel};
use crate::error::{Error, Result};
use crate::grasp::GraspScenario;
use crate::learn::{ForestParams, WindowSpec};
use crate::sensor::SensorModel;
use crate::Scalar;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub f_start: Scalar,
    pub f_end: Scalar,
    pub step: Scalar,
    pub probe_distance: Scalar,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            f_start: 100e6,
            f_end: 400e6,
            step: 1e6,
            probe_distance: 0.005,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Frames with ground truth at or below this are contact-free and
    /// excluded from fidelity statistics (newtons).
    pub min_true_force: Scalar,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            min_true_force: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Root seed; `--seed` overrides it.
    pub seed: Option<u64>,
    pub sensor: SensorModel,
    pub protocol: PressProtocol,
    pub window: WindowSpec,
    pub forest: ForestParams,
    pub detector: DetectorConfig,
    pub scenario: GraspScenario,
    pub coupling: CouplingModel,
    pub sweep: SweepConfig,
    pub metrics: MetricsConfig,
    pub calibration: CalibrationTargets,
    /// EMI layers applied when generating an attacked dataset.
    pub attack: Vec<AttackLayer>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let config: Config =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Load a config file; also returns the SHA-256 of its bytes for
    /// provenance stamping.
    pub fn load(path: &Path) -> Result<(Config, String)> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Config::parse(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let hash = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok((config, hash))
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.protocol.validate()?;
        self.window.validate()?;
        self.detector.validate()?;
        self.scenario.validate()?;
        self.coupling.validate()?;
        if !(self.sweep.f_start < self.sweep.f_end) || !(self.sweep.step > 0.0) {
            return Err(Error::Config(
                "sweep needs f_start < f_end and step > 0".into(),
            ));
        }
        for layer in &self.attack {
            layer.coupling.validate()?;
            layer.attack.validate()?;
        }
        Ok(())
    }

    pub fn effective_seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.seed).unwrap_or(self.protocol.seed)
    }
}
