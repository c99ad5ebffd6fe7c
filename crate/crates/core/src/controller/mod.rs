//! Force-controlled screwing/unscrewing state machine.
//!
//! The axial force target follows the measured torque scaled by a force/torque ratio `nu`,
//! floored by a slow ramp that speeds up whenever the driver cams out. A PID loop with
//! spring feed-forward turns the force target into a carriage position.

mod calibration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Direction, FtSample, ToolCommand};

pub use calibration::{calibrate_force, CalibrationError, ForceCalibration};

/// Number of trailing samples that must rise strictly for a seating decision.
const SEAT_TAIL: usize = 3;

#[derive(Debug, Error, PartialEq)]
#[error("invalid controller parameter `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Force/torque ratio of the force law (1/m).
    pub nu: f64,
    /// Multiplier on `nu`. Zero disables the law and leaves the ramp alone.
    pub margin: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Proportional gain (m/N).
    pub kp: f64,
    /// Integral gain (m/(N·s)).
    pub ki: f64,
    /// Derivative gain (m·s/N).
    pub kd: f64,
    /// Cam-out when the latest torque falls below this fraction of the window maximum.
    pub theta_slip: f64,
    /// Seating torque (N·m).
    pub tau_stop: f64,
    /// Torque treated as zero (N·m).
    pub noise_floor: f64,
    /// Torque window length (samples).
    pub window: usize,
    /// Force ramp without slips (N/s).
    pub base_ramp: f64,
    /// Force ramp while a cam-out is detected (N/s).
    pub slip_ramp: f64,
    /// Spring constant assumed by the feed-forward term (N/m).
    pub k_spring_est: f64,
    /// Spindle speed magnitude (rad/s).
    pub spindle_speed: f64,
    /// Carriage speed while searching for the head (m/s).
    pub approach_speed: f64,
    /// Measured force that counts as contact (N).
    pub contact_force: f64,
    /// Torque that aborts the run (N·m).
    pub overload_torque: f64,
    /// Cam-outs tolerated without a slip-free `progress_time` in between.
    pub slip_limit: u32,
    pub progress_time: f64,
    /// Carriage travel relative to the contact point (m).
    pub travel_min: f64,
    pub travel_max: f64,
    /// Extra spindle rotation after the screw comes free (rad).
    pub backout_angle: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            nu: 106.0,
            margin: 2.0,
            f_min: 1.0,
            f_max: 60.0,
            kp: 6.0e-5,
            ki: 1.0e-3,
            kd: 0.0,
            theta_slip: 0.5,
            tau_stop: 0.25,
            noise_floor: 0.03,
            window: 20,
            base_ramp: 0.25,
            slip_ramp: 5.0,
            k_spring_est: 5000.0,
            spindle_speed: std::f64::consts::PI,
            approach_speed: 0.005,
            contact_force: 0.5,
            overload_torque: 0.4,
            slip_limit: 25,
            progress_time: 1.0,
            travel_min: -0.005,
            travel_max: 0.03,
            backout_angle: 6.0 * std::f64::consts::PI,
        }
    }
}

impl ControllerConfig {
    /// Pure force ramp with the torque law switched off, as used to find the force at
    /// which cam-outs stop.
    pub fn force_ramp() -> Self {
        Self {
            margin: 0.0,
            f_min: 0.5,
            base_ramp: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &'static str, reason: String| Err(ConfigError { field, reason });
        let finite = [
            ("controller.nu", self.nu),
            ("controller.margin", self.margin),
            ("controller.f_min", self.f_min),
            ("controller.f_max", self.f_max),
            ("controller.kp", self.kp),
            ("controller.ki", self.ki),
            ("controller.kd", self.kd),
            ("controller.base_ramp", self.base_ramp),
            ("controller.slip_ramp", self.slip_ramp),
            ("controller.approach_speed", self.approach_speed),
            ("controller.contact_force", self.contact_force),
            ("controller.progress_time", self.progress_time),
            ("controller.backout_angle", self.backout_angle),
        ];
        for (field, v) in finite {
            if !v.is_finite() || v < 0.0 {
                return err(field, format!("must be finite and >= 0, got {v}"));
            }
        }
        if !(self.theta_slip > 0.0 && self.theta_slip < 1.0) {
            return err("controller.theta_slip", format!("must be in (0, 1), got {}", self.theta_slip));
        }
        if self.f_min > self.f_max {
            return err("controller.f_min", format!("{} exceeds f_max {}", self.f_min, self.f_max));
        }
        if self.window < 2 {
            return err("controller.window", format!("must be >= 2, got {}", self.window));
        }
        if !(self.noise_floor >= 0.0 && self.tau_stop > self.noise_floor) {
            return err(
                "controller.tau_stop",
                format!("{} must exceed noise_floor {}", self.tau_stop, self.noise_floor),
            );
        }
        if self.overload_torque.is_nan() || self.overload_torque <= self.tau_stop {
            return err(
                "controller.overload_torque",
                format!("{} must exceed tau_stop {}", self.overload_torque, self.tau_stop),
            );
        }
        if !(self.k_spring_est.is_finite() && self.k_spring_est > 0.0) {
            return err("controller.k_spring_est", format!("must be > 0, got {}", self.k_spring_est));
        }
        if !(self.spindle_speed.is_finite() && self.spindle_speed > 0.0) {
            return err("controller.spindle_speed", format!("must be > 0, got {}", self.spindle_speed));
        }
        if !(self.travel_min < 0.0 && self.travel_max > 0.0) {
            return err(
                "controller.travel_max",
                format!("travel must bracket zero, got [{}, {}]", self.travel_min, self.travel_max),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Engage,
    Drive,
    Seated,
    Free,
    Done,
    Fault,
}

impl Phase {
    /// Whether `self -> to` is an edge of the state graph. Staying put is always allowed.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        if self == to {
            return true;
        }
        match (self, to) {
            (Done, _) | (Fault, _) => false,
            (_, Fault) => true,
            (Approach, Engage) | (Engage, Drive) | (Drive, Seated) | (Drive, Free) => true,
            (Seated, Done) | (Free, Done) => true,
            _ => false,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Fault)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultReason {
    Overload,
    SlipStall,
    NoContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    None,
    Seated,
    Free,
}

/// Sliding window of recent torque readings plus the largest reading ever pushed.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueWindow {
    capacity: usize,
    values: Vec<f64>,
    peak: f64,
}

impl TorqueWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            values: Vec::with_capacity(capacity),
            peak: 0.0,
        }
    }

    /// Window pre-filled with `values` (oldest first), all counted as history.
    pub fn from_values(capacity: usize, values: &[f64]) -> Self {
        let mut w = Self::new(capacity);
        for &v in values {
            w.push(v);
        }
        w
    }

    pub fn push(&mut self, torque: f64) {
        if self.values.len() == self.capacity {
            self.values.remove(0);
        }
        self.values.push(torque);
        self.peak = self.peak.max(torque);
    }

    /// Record that torque once reached `torque` without adding a sample.
    pub fn note_history(&mut self, torque: f64) {
        self.peak = self.peak.max(torque);
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.peak = 0.0;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Largest torque seen since the window was created or cleared.
    pub fn history_max(&self) -> f64 {
        self.peak
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub phase: Phase,
    pub direction: Direction,
    /// Accumulated force error (N·s).
    pub integrator: f64,
    pub prev_error: f64,
    pub torque_window: TorqueWindow,
    pub force_target: f64,
    /// Ramp floor under the force law.
    pub ramp_force: f64,
    pub slip_count: u32,
    pub slips_since_progress: u32,
    pub time_since_slip: f64,
    pub time_in_phase: f64,
    pub z_cmd: f64,
    /// Carriage position where contact was first felt.
    pub contact_ref: f64,
    z_start: f64,
    camout_active: bool,
    pub fault: Option<FaultReason>,
}

impl ControllerState {
    pub fn new(direction: Direction, z_start: f64, cfg: &ControllerConfig) -> Self {
        Self {
            phase: Phase::Approach,
            direction,
            integrator: 0.0,
            prev_error: 0.0,
            torque_window: TorqueWindow::new(cfg.window),
            force_target: cfg.f_min,
            ramp_force: cfg.f_min,
            slip_count: 0,
            slips_since_progress: 0,
            time_since_slip: 0.0,
            time_in_phase: 0.0,
            z_cmd: z_start,
            contact_ref: z_start,
            z_start,
            camout_active: false,
            fault: None,
        }
    }

    /// Whether the last update saw a cam-out.
    pub fn camout_active(&self) -> bool {
        self.camout_active
    }

    fn enter(&mut self, phase: Phase) {
        debug_assert!(self.phase.can_transition(phase));
        if phase != self.phase {
            self.phase = phase;
            self.time_in_phase = 0.0;
        }
    }

    /// Step the force loop toward the current target and move the carriage.
    fn track(&mut self, f_meas: f64, dt: f64, cfg: &ControllerConfig) {
        let target = self.force_target;
        self.z_cmd = self.contact_ref + pid_force_step(self, f_meas, target, dt, cfg);
    }

    fn fail(&mut self, reason: FaultReason) {
        self.fault = Some(reason);
        self.enter(Phase::Fault);
    }
}

/// Axial force demanded for a filtered torque.
pub fn target_force(tau_filtered: f64, cfg: &ControllerConfig) -> f64 {
    (cfg.margin * cfg.nu * tau_filtered.max(0.0)).clamp(cfg.f_min, cfg.f_max)
}

/// Sharp torque drop relative to the window maximum.
pub fn detect_camout(torque_window: &[f64], cfg: &ControllerConfig) -> bool {
    let Some(&latest) = torque_window.last() else {
        return false;
    };
    if torque_window.len() < 2 {
        return false;
    }
    let peak = torque_window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak > cfg.noise_floor && latest < cfg.theta_slip * peak
}

/// Seating while screwing, or the screw coming free while unscrewing.
pub fn detect_terminal(window: &TorqueWindow, direction: Direction, cfg: &ControllerConfig) -> Terminal {
    let values = window.values();
    if values.len() < 2 {
        return Terminal::None;
    }
    match direction {
        Direction::Screwing => {
            let latest = values[values.len() - 1];
            let tail = &values[values.len().saturating_sub(SEAT_TAIL)..];
            let rising = tail.windows(2).all(|w| w[1] > w[0]);
            if latest >= cfg.tau_stop && rising {
                Terminal::Seated
            } else {
                Terminal::None
            }
        }
        Direction::Unscrewing => {
            let quiet = values.iter().all(|&v| v < cfg.noise_floor);
            if window.is_full() && quiet && window.history_max() >= cfg.noise_floor {
                Terminal::Free
            } else {
                Terminal::None
            }
        }
    }
}

/// One PID step. Returns the carriage offset from the contact point (m).
///
/// Integration pauses while the output sits on a travel limit and the error pushes further
/// into it.
pub fn pid_force_step(
    state: &mut ControllerState,
    f_meas: f64,
    f_target: f64,
    dt: f64,
    cfg: &ControllerConfig,
) -> f64 {
    let error = f_target - f_meas;
    let derivative = (error - state.prev_error) / dt;
    let feed_forward = f_target / cfg.k_spring_est;
    let candidate = state.integrator + error * dt;
    let unsaturated =
        cfg.kp * error + cfg.ki * candidate + cfg.kd * derivative + feed_forward;
    let pushing_out = (unsaturated > cfg.travel_max && error > 0.0)
        || (unsaturated < cfg.travel_min && error < 0.0);
    if !pushing_out {
        state.integrator = candidate;
    }
    if cfg.ki > 0.0 {
        let limit = (cfg.travel_max - cfg.travel_min) / cfg.ki;
        state.integrator = state.integrator.clamp(-limit, limit);
    }
    state.prev_error = error;
    let out = cfg.kp * error + cfg.ki * state.integrator + cfg.kd * derivative + feed_forward;
    out.clamp(cfg.travel_min, cfg.travel_max)
}

/// Advance the controller by one measured sample.
pub fn update(
    state: &ControllerState,
    sample: &FtSample,
    dt: f64,
    cfg: &ControllerConfig,
) -> (ControllerState, ToolCommand) {
    let mut s = state.clone();
    s.time_in_phase += dt;
    let spin = s.direction.sign() * cfg.spindle_speed;
    let hold = ToolCommand {
        z_cmd: s.z_cmd,
        spindle_speed: 0.0,
    };

    match s.phase {
        Phase::Done | Phase::Fault => return (s, hold),
        Phase::Approach => {
            if sample.fz > cfg.contact_force {
                s.contact_ref = s.z_cmd;
                s.force_target = cfg.f_min;
                s.ramp_force = cfg.f_min;
                s.integrator = 0.0;
                s.prev_error = cfg.f_min - sample.fz;
                s.torque_window.clear();
                s.enter(Phase::Engage);
                s.track(sample.fz, dt, cfg);
                return emit(s, spin);
            }
            s.z_cmd += cfg.approach_speed * dt;
            if s.z_cmd - s.z_start > cfg.travel_max {
                s.fail(FaultReason::NoContact);
                return emit(s, 0.0);
            }
            return emit(s, 0.0);
        }
        Phase::Seated => {
            s.enter(Phase::Done);
            s.track(sample.fz, dt, cfg);
            return emit(s, 0.0);
        }
        Phase::Free => {
            s.track(sample.fz, dt, cfg);
            if s.time_in_phase * cfg.spindle_speed >= cfg.backout_angle - 1e-9 {
                s.enter(Phase::Done);
                return emit(s, 0.0);
            }
            return emit(s, spin);
        }
        Phase::Engage | Phase::Drive => {}
    }

    s.torque_window.push(sample.mz);
    let camout = detect_camout(s.torque_window.values(), cfg);
    if camout {
        if !s.camout_active {
            s.slip_count += 1;
            s.slips_since_progress += 1;
        }
        s.time_since_slip = 0.0;
        s.ramp_force = s.ramp_force.max(s.force_target) + cfg.slip_ramp * dt;
    } else {
        s.time_since_slip += dt;
        if s.time_since_slip >= cfg.progress_time {
            s.slips_since_progress = 0;
        }
        s.ramp_force += cfg.base_ramp * dt;
    }
    s.camout_active = camout;
    s.ramp_force = s.ramp_force.min(cfg.f_max);

    let law = if s.phase == Phase::Drive {
        target_force(s.torque_window.max(), cfg)
    } else {
        cfg.f_min
    };
    s.force_target = s.ramp_force.max(law).clamp(cfg.f_min, cfg.f_max);
    s.track(sample.fz, dt, cfg);

    if sample.mz > cfg.overload_torque {
        s.fail(FaultReason::Overload);
        return emit(s, 0.0);
    }
    if s.slips_since_progress > cfg.slip_limit {
        s.fail(FaultReason::SlipStall);
        return emit(s, 0.0);
    }

    match s.phase {
        Phase::Engage => {
            if s.time_in_phase >= cfg.window as f64 * dt - dt * 1e-6 {
                s.enter(Phase::Drive);
            }
        }
        Phase::Drive => match detect_terminal(&s.torque_window, s.direction, cfg) {
            Terminal::Seated => {
                s.enter(Phase::Seated);
                return emit(s, 0.0);
            }
            Terminal::Free => {
                s.enter(Phase::Free);
            }
            Terminal::None => {}
        },
        _ => unreachable!("handled above"),
    }
    emit(s, spin)
}

fn emit(s: ControllerState, spindle_speed: f64) -> (ControllerState, ToolCommand) {
    let z_cmd = s.z_cmd;
    (s, ToolCommand { z_cmd, spindle_speed })
}
