//! Discrete-time closed-loop grasp simulation.
//!
//! A ramp-limited grip actuator presses an object while a discrete PI
//! controller regulates the normal force using the (possibly spoofed)
//! sensor reading. Slip, drop, and crush events are evaluated per frame.
//! The normal axis is z; the tangential gravity load is carried on x and
//! shared between the two fingertips.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::emi::{self, AttackLayer};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sensor::{SensorFrame, SensorModel};
use crate::{ForceVec, Scalar, GRAVITY};

/// Frames of sustained slip before a drop is declared.
pub const DROP_LATENCY_FRAMES: u32 = 50;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    /// Proportional gain, per frame.
    pub kp: Scalar,
    /// Integral gain, per frame.
    pub ki: Scalar,
    /// Clamp on the accumulated error, newtons.
    pub integrator_limit: Scalar,
    pub max_grip_force: Scalar,
    /// Actuator slew limit, newtons per frame.
    pub ramp_rate: Scalar,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            kp: 0.4,
            ki: 0.05,
            integrator_limit: 1000.0,
            max_grip_force: 100.0,
            ramp_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub integrator: Scalar,
}

/// One discrete PI step: `command = clamp(target + kp*e + ki*I, 0, max)`
/// with the integrator clamped to `±integrator_limit`.
pub fn controller_step(
    params: &ControllerParams,
    state: ControllerState,
    measured_normal: Scalar,
    target: Scalar,
) -> (Scalar, ControllerState) {
    let error = target - measured_normal;
    let integrator = (state.integrator + error)
        .clamp(-params.integrator_limit, params.integrator_limit);
    let command =
        (target + params.kp * error + params.ki * integrator).clamp(0.0, params.max_grip_force);
    (command, ControllerState { integrator })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspScenario {
    /// kg.
    pub object_mass: Scalar,
    pub friction_coeff: Scalar,
    /// Grip force at which the object is destroyed, newtons.
    pub crush_force: Scalar,
    pub target_normal_force: Scalar,
    pub controller: ControllerParams,
    pub total_frames: u64,
    #[serde(default)]
    pub attack: Vec<AttackLayer>,
    pub seed: u64,
}

impl Default for GraspScenario {
    fn default() -> Self {
        GraspScenario {
            object_mass: 1.0,
            friction_coeff: 0.8,
            crush_force: 80.0,
            target_normal_force: 35.0,
            controller: ControllerParams::default(),
            total_frames: 1000,
            attack: Vec::new(),
            seed: 42,
        }
    }
}

impl GraspScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.friction_coeff > 0.0) {
            return Err(Error::Invariant("friction_coeff must be > 0".into()));
        }
        if !(self.crush_force > self.target_normal_force && self.target_normal_force > 0.0) {
            return Err(Error::Invariant(format!(
                "need crush_force > target_normal_force > 0 (got {} and {})",
                self.crush_force, self.target_normal_force
            )));
        }
        if self.total_frames == 0 {
            return Err(Error::Invariant("total_frames must be > 0".into()));
        }
        let c = &self.controller;
        if c.kp < 0.0 || c.ki < 0.0 || !(c.ramp_rate > 0.0) {
            return Err(Error::Invariant(
                "controller needs kp, ki >= 0 and ramp_rate > 0".into(),
            ));
        }
        for layer in &self.attack {
            layer.coupling.validate()?;
            layer.attack.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSet {
    pub attack_on: bool,
    pub slip: bool,
    pub drop: bool,
    pub crush: bool,
}

impl EventSet {
    pub fn tokens(&self) -> String {
        let mut parts = Vec::new();
        if self.attack_on {
            parts.push("attack_on");
        }
        if self.slip {
            parts.push("slip");
        }
        if self.drop {
            parts.push("drop");
        }
        if self.crush {
            parts.push("crush");
        }
        parts.join(";")
    }

    pub fn parse(s: &str) -> Self {
        let mut e = EventSet::default();
        for tok in s.split(';') {
            match tok {
                "attack_on" => e.attack_on = true,
                "slip" => e.slip = true,
                "drop" => e.drop = true,
                "crush" => e.crush = true,
                _ => {}
            }
        }
        e
    }
}

/// Per-frame event rules. `slip_run` counts consecutive slip frames up to
/// and including this one; `drop` and `crush` latch once fired.
pub fn detect_events(
    scenario: &GraspScenario,
    applied_grip: Scalar,
    attack_on: bool,
    slip_run: u32,
    latched: EventSet,
) -> EventSet {
    let slip = scenario.friction_coeff * applied_grip < scenario.object_mass * GRAVITY;
    EventSet {
        attack_on,
        slip,
        drop: latched.drop || (slip && slip_run >= DROP_LATENCY_FRAMES),
        crush: latched.crush || applied_grip >= scenario.crush_force,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStep {
    pub frame_index: u64,
    pub time: Scalar,
    /// Controller output in effect this frame, newtons.
    pub commanded_grip: Scalar,
    /// Grip actually applied after the actuator ramp limit; equals the
    /// real normal force (z component of `true_force`).
    pub true_force: ForceVec,
    pub spoofed_reading: ForceVec,
    pub events: EventSet,
}

impl SimStep {
    pub fn real_normal_force(&self) -> Scalar {
        self.true_force.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub frames: Vec<SimStep>,
}

pub const TRACE_CSV_HEADER: &str =
    "frame,time_s,cmd_n,real_fx,real_fy,real_fz,meas_fx,meas_fy,meas_fz,events";

impl SimTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for s in &self.frames {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                s.frame_index,
                s.time,
                s.commanded_grip,
                s.true_force.x,
                s.true_force.y,
                s.true_force.z,
                s.spoofed_reading.x,
                s.spoofed_reading.y,
                s.spoofed_reading.z,
                s.events.tokens()
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut frames = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<trace csv>", e))?;
            if lineno == 0 {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(Error::Config(format!(
                    "trace csv line {} has {} fields, expected 10",
                    lineno + 1,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<Scalar> {
                fields[i]
                    .parse()
                    .map_err(|e| Error::Config(format!("trace csv line {}: {e}", lineno + 1)))
            };
            frames.push(SimStep {
                frame_index: fields[0]
                    .parse()
                    .map_err(|e| Error::Config(format!("trace csv line {}: {e}", lineno + 1)))?,
                time: num(1)?,
                commanded_grip: num(2)?,
                true_force: ForceVec::new(num(3)?, num(4)?, num(5)?),
                spoofed_reading: ForceVec::new(num(6)?, num(7)?, num(8)?),
                events: EventSet::parse(fields[9]),
            });
        }
        Ok(SimTrace { frames })
    }

    /// Measured readings as sensor frames, for the detector and metrics.
    pub fn sensor_frames(&self) -> Vec<SensorFrame> {
        self.frames
            .iter()
            .map(|s| SensorFrame {
                frame_index: s.frame_index,
                time: s.time,
                true_force: s.true_force,
                measured_force: s.spoofed_reading,
            })
            .collect()
    }
}

/// Run the closed-loop scenario. Deterministic given the scenario seed.
pub fn run_scenario(scenario: &GraspScenario, sensor: &SensorModel) -> Result<SimTrace> {
    scenario.validate()?;
    sensor.validate()?;
    let mut rng = RngStream::new(scenario.seed, "grasp");

    let mut commanded = scenario.target_normal_force;
    let mut applied: Scalar = 0.0;
    let mut ctrl = ControllerState::default();
    let mut slip_run: u32 = 0;
    let mut latched = EventSet::default();
    let mut frames = Vec::with_capacity(scenario.total_frames as usize);

    for i in 0..scenario.total_frames {
        // Actuator tracks the command under the slew limit.
        let delta = (commanded - applied)
            .clamp(-scenario.controller.ramp_rate, scenario.controller.ramp_rate);
        applied += delta;

        // Contact: normal force equals the applied grip; the gravity load
        // is carried tangentially until the object is gone.
        let tangential = if latched.drop {
            0.0
        } else {
            scenario.object_mass * GRAVITY / 2.0
        };
        let true_force = ForceVec::new(tangential, 0.0, applied);

        let sensed = SensorFrame {
            frame_index: i,
            time: i as Scalar / sensor.sample_rate,
            true_force,
            measured_force: sensor.transduce(true_force, &mut rng),
        };
        let spoofed = emi::perturb_layers(&scenario.attack, &sensed, sensor.saturation);

        let attack_on = scenario.attack.iter().any(|l| l.attack.active_at(i));
        let events = detect_events(scenario, applied, attack_on, slip_run, latched);
        slip_run = if events.slip { slip_run + 1 } else { 0 };
        latched.drop = events.drop;
        latched.crush = events.crush;

        frames.push(SimStep {
            frame_index: i,
            time: sensed.time,
            commanded_grip: commanded,
            true_force,
            spoofed_reading: spoofed,
            events,
        });

        let (next_command, next_state) = controller_step(
            &scenario.controller,
            ctrl,
            spoofed.z,
            scenario.target_normal_force,
        );
        commanded = next_command;
        ctrl = next_state;
    }

    Ok(SimTrace { frames })
}
