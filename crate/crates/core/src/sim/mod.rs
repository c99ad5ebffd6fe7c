//! Fixed-step model of a screwdriver pressing on a screw through a spring-compliant mount.
//!
//! The world advances in `dt` increments. Each step the carriage moves to the commanded
//! position, the spring converts the overlap with the screw head into axial force, and the
//! spindle either turns the screw against the substrate friction or cams out of the recess.
//! Truth samples are noise-free; [`read_sensors`] turns them into what the gripper measures.

pub mod operator;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use operator::{HumanOperator, HumanParams};

/// Deterministic generator owned by one simulation instance.
pub type SimRng = ChaCha8Rng;

/// Build the instance generator for a seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    rand::SeedableRng::seed_from_u64(seed)
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("non-finite tool command (z_cmd = {z_cmd}, spindle_speed = {spindle_speed})")]
    NonFiniteCommand { z_cmd: f64, spindle_speed: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadType {
    Phillips,
    InternalHex,
    /// Driver bit that does not match the recess.
    MismatchedDriver,
}

impl HeadType {
    /// Default slip-threshold force/torque ratio (1/m).
    pub fn default_nu(self) -> f64 {
        match self {
            HeadType::Phillips => 106.0,
            HeadType::InternalHex => 57.0,
            HeadType::MismatchedDriver => 300.0,
        }
    }

    /// Angle the tool skips when it cams out: one recess lobe.
    pub fn default_skip_angle(self) -> f64 {
        match self {
            HeadType::Phillips | HeadType::MismatchedDriver => FRAC_PI_2,
            HeadType::InternalHex => FRAC_PI_3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Screwing,
    Unscrewing,
}

impl Direction {
    /// Sign of the spindle speed for this direction.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Screwing => 1.0,
            Direction::Unscrewing => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstrateKind {
    PlasticHole,
    Nut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// Fastener geometry and recess behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrewSpec {
    pub head_type: HeadType,
    /// Axial advance per revolution (m/rev).
    pub thread_pitch: f64,
    /// Threaded length (m).
    pub shank_length: f64,
    /// Force/torque ratio at which the slip probability is halved (1/m).
    pub nu_char: f64,
    /// Tool skip on cam-out (rad).
    pub cam_geometry_angle: f64,
}

impl ScrewSpec {
    /// M3 x 8 mm screw with the given head.
    pub fn m3(head_type: HeadType) -> Self {
        Self {
            head_type,
            thread_pitch: 0.0005,
            shank_length: 0.008,
            nu_char: head_type.default_nu(),
            cam_geometry_angle: head_type.default_skip_angle(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        positive("screw.thread_pitch", self.thread_pitch)?;
        positive("screw.shank_length", self.shank_length)?;
        positive("screw.nu_char", self.nu_char)?;
        non_negative("screw.cam_geometry_angle", self.cam_geometry_angle)?;
        Ok(())
    }
}

/// Material the screw is driven into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstrateSpec {
    pub kind: SubstrateKind,
    /// Extra torque for cutting a new thread while screwing (N·m).
    pub tau_cut: f64,
    /// Running torque per metre of engaged thread (N·m/m).
    pub k_depth: f64,
    /// Running torque inside a nut (N·m).
    pub tau_run_nut: f64,
    /// Torsional stiffness once the head is seated (N·m/rad).
    pub k_seat: f64,
    pub orientation: Orientation,
}

impl SubstrateSpec {
    /// Printed plastic prism with a 3 mm pilot hole. `k_depth` gives 0.19 N·m of
    /// unscrewing torque at the full 8 mm engagement of an M3 x 8 screw.
    pub fn plastic_hole(orientation: Orientation) -> Self {
        Self {
            kind: SubstrateKind::PlasticHole,
            tau_cut: 0.02,
            k_depth: 0.19 / 0.008,
            tau_run_nut: 0.0,
            k_seat: 0.3,
            orientation,
        }
    }

    /// Prism with an embedded M3 nut; running torque sits under the sensor noise.
    pub fn nut(orientation: Orientation) -> Self {
        Self {
            kind: SubstrateKind::Nut,
            tau_cut: 0.0,
            k_depth: 0.0,
            tau_run_nut: 0.002,
            k_seat: 0.3,
            orientation,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        non_negative("substrate.tau_cut", self.tau_cut)?;
        non_negative("substrate.k_depth", self.k_depth)?;
        non_negative("substrate.tau_run_nut", self.tau_run_nut)?;
        positive("substrate.k_seat", self.k_seat)?;
        Ok(())
    }
}

/// Plant, noise and stepping parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Compliant mount stiffness (N/m).
    pub k_spring: f64,
    pub force_noise_std: f64,
    pub torque_noise_std: f64,
    /// Per-step slip probability with no axial force.
    pub p_max: f64,
    /// Logistic steepness of the slip probability in the force/threshold ratio.
    pub slip_sharpness: f64,
    /// How long a cam-out keeps the tool disengaged (s).
    pub slip_dwell: f64,
    pub dt: f64,
    /// Initial gap between the tool tip and the screw head (m).
    pub standoff: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            k_spring: 5000.0,
            force_noise_std: 0.1,
            torque_noise_std: 0.003,
            p_max: 0.05,
            slip_sharpness: 6.0,
            slip_dwell: 0.1,
            dt: 0.01,
            standoff: 0.001,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        positive("sim.k_spring", self.k_spring)?;
        non_negative("sim.force_noise_std", self.force_noise_std)?;
        non_negative("sim.torque_noise_std", self.torque_noise_std)?;
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(invalid("sim.p_max", format!("must be in (0, 1], got {}", self.p_max)));
        }
        non_negative("sim.slip_sharpness", self.slip_sharpness)?;
        non_negative("sim.slip_dwell", self.slip_dwell)?;
        positive("sim.dt", self.dt)?;
        non_negative("sim.standoff", self.standoff)?;
        Ok(())
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), SimError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<(), SimError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

/// One axial force/torque reading. Stored values are magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FtSample {
    /// Time (s).
    pub t: f64,
    /// Axial force (N).
    pub fz: f64,
    /// Axial torque (N·m).
    pub mz: f64,
}

/// Position command for the carriage plus the signed spindle speed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ToolCommand {
    /// Carriage position (m), positive towards the screw.
    pub z_cmd: f64,
    /// Spindle speed (rad/s); positive drives the screw in.
    pub spindle_speed: f64,
}

/// Full physical state of the tool, screw and mount.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Cumulative screw rotation (rad), positive in the tightening sense.
    pub screw_angle: f64,
    /// Thread length inside the substrate (m).
    pub engaged_depth: f64,
    pub seated: bool,
    /// Screw angle at first head contact.
    pub seat_angle: f64,
    /// Carriage position (m).
    pub tool_z: f64,
    /// Carriage position at which the spring starts compressing. Tracks the head as the
    /// screw advances or backs out.
    pub contact_z: f64,
    pub spring_deflection: f64,
    pub slipping: bool,
    pub slip_time_left: f64,
    /// Tool rotation (rad), including cam-out skips.
    pub tool_angle: f64,
    pub time: f64,
    /// Number of completed steps.
    pub step: u64,
    /// Cam-outs so far.
    pub slip_events: u64,
}

impl WorldState {
    /// Tool hovering `params.standoff` above the head with the screw at `engaged_depth`.
    pub fn new(engaged_depth: f64, params: &SimParams) -> Self {
        Self {
            screw_angle: 0.0,
            engaged_depth,
            seated: false,
            seat_angle: 0.0,
            tool_z: -params.standoff,
            contact_z: 0.0,
            spring_deflection: 0.0,
            slipping: false,
            slip_time_left: 0.0,
            tool_angle: 0.0,
            time: 0.0,
            step: 0,
            slip_events: 0,
        }
    }

    /// Starting state for a run: empty hole for screwing, fully engaged for unscrewing.
    pub fn initial(direction: Direction, screw: &ScrewSpec, params: &SimParams) -> Self {
        let depth = match direction {
            Direction::Screwing => 0.0,
            Direction::Unscrewing => screw.shank_length,
        };
        Self::new(depth, params)
    }

    /// Axial force the spring currently transmits (N).
    pub fn spring_force(&self, params: &SimParams) -> f64 {
        params.k_spring * self.spring_deflection
    }
}

/// Torque needed to keep the screw turning in `direction` from the given state.
///
/// Depends on the thread state only; there is no speed input.
pub fn required_torque(
    world: &WorldState,
    _screw: &ScrewSpec,
    substrate: &SubstrateSpec,
    direction: Direction,
) -> f64 {
    let seating = if world.seated {
        substrate.k_seat * (world.screw_angle - world.seat_angle).max(0.0)
    } else {
        0.0
    };
    let running = match substrate.kind {
        SubstrateKind::PlasticHole => {
            let cut = match direction {
                Direction::Screwing => substrate.tau_cut,
                Direction::Unscrewing => 0.0,
            };
            cut + substrate.k_depth * world.engaged_depth
        }
        SubstrateKind::Nut => {
            if world.engaged_depth > 0.0 {
                substrate.tau_run_nut
            } else {
                0.0
            }
        }
    };
    running + seating
}

/// Per-step probability that the driver cams out.
pub fn slip_probability(axial_force: f64, tau_req: f64, screw: &ScrewSpec, params: &SimParams) -> f64 {
    if tau_req <= 0.0 {
        return 0.0;
    }
    let ratio = axial_force.max(0.0) / (screw.nu_char * tau_req);
    let p = params.p_max / (1.0 + (params.slip_sharpness * (ratio - 1.0)).exp());
    p.clamp(0.0, params.p_max)
}

/// Advance the world by one `params.dt`.
///
/// Returns the next state and the noise-free sample for the step. The sample time is the
/// time at the start of the step.
pub fn step_world(
    world: &WorldState,
    cmd: ToolCommand,
    screw: &ScrewSpec,
    substrate: &SubstrateSpec,
    params: &SimParams,
    rng: &mut SimRng,
) -> Result<(WorldState, FtSample), SimError> {
    if !cmd.z_cmd.is_finite() || !cmd.spindle_speed.is_finite() {
        return Err(SimError::NonFiniteCommand {
            z_cmd: cmd.z_cmd,
            spindle_speed: cmd.spindle_speed,
        });
    }
    let dt = params.dt;
    let mut next = world.clone();
    next.tool_z = cmd.z_cmd;
    next.spring_deflection = (next.tool_z - next.contact_z).max(0.0);
    let force = next.spring_force(params);
    let in_contact = next.spring_deflection > 0.0;

    let mut torque = 0.0;
    if next.slipping {
        next.slip_time_left -= dt;
        if next.slip_time_left <= dt * 1e-6 {
            next.slipping = false;
            next.slip_time_left = 0.0;
        }
    } else if in_contact && cmd.spindle_speed != 0.0 {
        let direction = if cmd.spindle_speed > 0.0 {
            Direction::Screwing
        } else {
            Direction::Unscrewing
        };
        let tau_req = required_torque(&next, screw, substrate, direction);
        let p = slip_probability(force, tau_req, screw, params);
        let draw: f64 = rng.random();
        if draw < p {
            next.tool_angle += direction.sign() * screw.cam_geometry_angle;
            next.slip_events += 1;
            // the step that starts the slip counts towards the dwell
            next.slip_time_left = params.slip_dwell - dt;
            next.slipping = next.slip_time_left > dt * 1e-6;
        } else {
            torque = tau_req;
            let delta = cmd.spindle_speed * dt;
            next.tool_angle += delta;
            rotate_screw(&mut next, delta, screw);
        }
    }

    next.step += 1;
    next.time = step_time(next.step, dt);
    let sample = FtSample {
        t: step_time(world.step, dt),
        fz: force,
        mz: torque,
    };
    Ok((next, sample))
}

/// Time of the start of `step`. Integer sample rates divide instead of multiply so logged
/// times print as short decimals.
pub fn step_time(step: u64, dt: f64) -> f64 {
    let rate = 1.0 / dt;
    if (rate - rate.round()).abs() < 1e-9 {
        step as f64 / rate.round()
    } else {
        step as f64 * dt
    }
}

/// Turn the screw by `delta` rad and move the engagement and contact point with it.
fn rotate_screw(world: &mut WorldState, delta: f64, screw: &ScrewSpec) {
    let per_rad = screw.thread_pitch / TAU;
    let before = world.engaged_depth;
    if delta >= 0.0 {
        if world.seated {
            world.screw_angle += delta;
        } else {
            let room = screw.shank_length - world.engaged_depth;
            let advance = delta * per_rad;
            if advance >= room {
                world.seat_angle = world.screw_angle + room / per_rad;
                world.engaged_depth = screw.shank_length;
                world.seated = true;
            } else {
                world.engaged_depth += advance;
            }
            world.screw_angle += delta;
        }
    } else {
        let mut remaining = delta;
        if world.seated {
            let unwind = world.screw_angle - world.seat_angle;
            if -remaining <= unwind {
                world.screw_angle += remaining;
                remaining = 0.0;
            } else {
                world.screw_angle = world.seat_angle;
                remaining += unwind;
                world.seated = false;
            }
        }
        if remaining < 0.0 {
            world.engaged_depth = (world.engaged_depth + remaining * per_rad).max(0.0);
            world.screw_angle += remaining;
        }
    }
    world.contact_z += world.engaged_depth - before;
}

/// Add zero-mean Gaussian noise to both channels and rectify.
pub fn read_sensors(truth: FtSample, params: &SimParams, rng: &mut SimRng) -> FtSample {
    let fz = truth.fz + gaussian(params.force_noise_std, rng);
    let mz = truth.mz + gaussian(params.torque_noise_std, rng);
    FtSample {
        t: truth.t,
        fz: fz.abs(),
        mz: mz.abs(),
    }
}

fn gaussian(std: f64, rng: &mut SimRng) -> f64 {
    if std == 0.0 {
        // keep the stream position independent of the configured noise
        let _: f64 = rng.sample(rand_distr::StandardNormal);
        return 0.0;
    }
    Normal::new(0.0, std).expect("validated std").sample(rng)
}
