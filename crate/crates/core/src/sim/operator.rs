//! Human-like operator used to synthesise recordings.
//!
//! The operator turns the screw in strokes separated by regrasp pauses and presses with a
//! force proportional to the torque it feels, plus a small holding force. Each run draws its
//! own force/torque ratio and regrasp frequency so batches spread like a group of people.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    required_torque, Direction, Orientation, ScrewSpec, SimParams, SimRng, SubstrateSpec,
    ToolCommand, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanParams {
    /// Mean regrasp frequency (Hz).
    pub regrasp_hz: f64,
    /// Per-run relative spread of the regrasp frequency (uniform, ±).
    pub regrasp_spread: f64,
    /// Fraction of each regrasp cycle spent turning.
    pub duty: f64,
    /// Rotation per stroke (rad).
    pub stroke_angle: f64,
    /// Median applied force/torque ratio at the ends of a stroke, relative to the screw's
    /// slip threshold.
    pub nu_scale: f64,
    /// Relative extra push at mid-stroke; the grip swells and relaxes along a half sine.
    pub press_swell: f64,
    /// Log-normal spread of the applied ratio across runs.
    pub nu_log_std: f64,
    /// Force kept on the driver between strokes (N).
    pub hold_force_vertical: f64,
    pub hold_force_horizontal: f64,
    /// Seating torque at which the operator stops screwing (N·m).
    pub stop_torque: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            regrasp_hz: 1.3,
            regrasp_spread: 0.3,
            duty: 0.6,
            stroke_angle: std::f64::consts::PI,
            nu_scale: 0.95,
            press_swell: 0.35,
            nu_log_std: 0.2,
            hold_force_vertical: 1.0,
            hold_force_horizontal: 3.0,
            stop_torque: 0.28,
        }
    }
}

/// One simulated person for one run.
#[derive(Debug, Clone)]
pub struct HumanOperator {
    /// Applied force/torque ratio (1/m).
    pub nu: f64,
    /// Regrasp frequency (Hz).
    pub frequency: f64,
    stroke_time: f64,
    stroke_speed: f64,
    hold_force: f64,
    stop_torque: f64,
    press_swell: f64,
    direction: Direction,
    clock: f64,
}

impl HumanOperator {
    pub fn draw(
        params: &HumanParams,
        screw: &ScrewSpec,
        substrate: &SubstrateSpec,
        direction: Direction,
        rng: &mut SimRng,
    ) -> Self {
        let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
        let nu = screw.nu_char * params.nu_scale * (params.nu_log_std * z).exp();
        let u: f64 = rng.random_range(-1.0..=1.0);
        let frequency = params.regrasp_hz * (1.0 + params.regrasp_spread * u);
        let stroke_time = params.duty / frequency;
        let hold_force = match substrate.orientation {
            Orientation::Vertical => params.hold_force_vertical,
            Orientation::Horizontal => params.hold_force_horizontal,
        };
        Self {
            nu,
            frequency,
            stroke_time,
            stroke_speed: params.stroke_angle / stroke_time,
            hold_force,
            stop_torque: params.stop_torque,
            press_swell: params.press_swell,
            direction,
            clock: 0.0,
        }
    }

    /// Fraction of the current stroke completed, or `None` during a regrasp pause.
    pub fn stroke_phase(&self) -> Option<f64> {
        let cycle = (self.clock * self.frequency).fract();
        let stroke = self.stroke_time * self.frequency;
        (cycle < stroke).then(|| cycle / stroke)
    }

    /// Command for the next step; advances the operator's clock by `params.dt`.
    pub fn command(
        &mut self,
        world: &WorldState,
        screw: &ScrewSpec,
        substrate: &SubstrateSpec,
        params: &SimParams,
    ) -> ToolCommand {
        let phase = self.stroke_phase();
        self.clock += params.dt;
        let (force, speed) = match phase {
            Some(s) => {
                let felt = required_torque(world, screw, substrate, self.direction);
                let swell = 1.0 + self.press_swell * (std::f64::consts::PI * s).sin();
                (
                    self.hold_force + self.nu * swell * felt,
                    self.direction.sign() * self.stroke_speed,
                )
            }
            None => (self.hold_force, 0.0),
        };
        ToolCommand {
            z_cmd: world.contact_z + force / params.k_spring,
            spindle_speed: speed,
        }
    }

    /// The operator stops once the screw is out, or once it feels the head seat.
    pub fn finished(&self, world: &WorldState, screw: &ScrewSpec, substrate: &SubstrateSpec) -> bool {
        match self.direction {
            Direction::Unscrewing => world.engaged_depth <= 0.0,
            Direction::Screwing => {
                world.seated
                    && required_torque(world, screw, substrate, self.direction) >= self.stop_torque
            }
        }
    }
}
