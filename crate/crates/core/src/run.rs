//! Closed-loop run orchestration: scenario in, sample log and report out.

use serde::{Deserialize, Serialize};

use crate::controller::{self, ControllerState, FaultReason, Phase};
use crate::scenario::{Driver, Scenario};
use crate::sim::{
    read_sensors, required_torque, seeded_rng, step_world, FtSample, HumanOperator, SimError,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Done,
    Fault,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultReason>,
    /// Cam-outs that happened in the plant.
    pub slip_events: u64,
    /// Cam-outs the controller noticed.
    pub detected_slips: u64,
    pub completion_time: f64,
    /// Largest measured torque (N·m).
    pub peak_torque: f64,
    /// Last measured axial force (N).
    pub final_force: f64,
    /// Force/torque ratio the driver applied (1/m).
    pub nu_applied: f64,
    pub final_engaged_depth: f64,
    pub seated: bool,
}

/// Everything known about one step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub truth: FtSample,
    pub measured: FtSample,
    /// Torque the thread demanded at the start of the step, slip or not.
    pub required_torque: f64,
    pub engaged_depth: f64,
    pub seated: bool,
    /// A cam-out started during this step.
    pub slip_started: bool,
    pub spindle_speed: f64,
    /// Controller force target; `NaN` for the human driver.
    pub force_target: f64,
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub records: Vec<StepRecord>,
    pub world: WorldState,
}

impl RunOutput {
    /// The sensor log.
    pub fn log(&self) -> Vec<FtSample> {
        self.records.iter().map(|r| r.measured).collect()
    }
}

/// Run a validated scenario to completion or timeout.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, SimError> {
    match scenario.driver {
        Driver::Robot => run_robot(scenario),
        Driver::Human => run_human(scenario),
    }
}

fn max_steps(scenario: &Scenario) -> u64 {
    // a partial final step would overrun the budget
    (scenario.duration / scenario.sim.dt + 1e-9).floor() as u64
}

fn run_robot(sc: &Scenario) -> Result<RunOutput, SimError> {
    let (screw, substrate, params, cfg) = (&sc.screw, &sc.substrate, &sc.sim, &sc.controller);
    let mut rng = seeded_rng(sc.seed);
    let mut world = WorldState::initial(sc.direction, screw, params);
    let mut ctrl = ControllerState::new(sc.direction, world.tool_z, cfg);
    let mut last = FtSample::default();
    let mut records = Vec::new();

    for _ in 0..max_steps(sc) {
        let (next_ctrl, cmd) = controller::update(&ctrl, &last, params.dt, cfg);
        ctrl = next_ctrl;
        let tau_req = required_torque(&world, screw, substrate, sc.direction);
        let (next, truth) = step_world(&world, cmd, screw, substrate, params, &mut rng)?;
        let measured = read_sensors(truth, params, &mut rng);
        records.push(StepRecord {
            truth,
            measured,
            required_torque: tau_req,
            engaged_depth: next.engaged_depth,
            seated: next.seated,
            slip_started: next.slip_events > world.slip_events,
            spindle_speed: cmd.spindle_speed,
            force_target: ctrl.force_target,
            phase: Some(ctrl.phase),
        });
        world = next;
        last = measured;
        // the terminal command is applied once so the log shows the spindle stopping
        if ctrl.phase.is_terminal() {
            break;
        }
    }

    let outcome = match ctrl.phase {
        Phase::Done => Outcome::Done,
        Phase::Fault => Outcome::Fault,
        _ => Outcome::Timeout,
    };
    let report = RunReport {
        outcome,
        fault: ctrl.fault,
        slip_events: world.slip_events,
        detected_slips: u64::from(ctrl.slip_count),
        completion_time: world.time,
        peak_torque: records.iter().map(|r| r.measured.mz).fold(0.0, f64::max),
        final_force: last.fz,
        nu_applied: cfg.margin * cfg.nu,
        final_engaged_depth: world.engaged_depth,
        seated: world.seated,
    };
    Ok(RunOutput { report, records, world })
}

fn run_human(sc: &Scenario) -> Result<RunOutput, SimError> {
    let (screw, substrate, params) = (&sc.screw, &sc.substrate, &sc.sim);
    let mut rng = seeded_rng(sc.seed);
    let mut world = WorldState::initial(sc.direction, screw, params);
    let mut operator = HumanOperator::draw(&sc.human, screw, substrate, sc.direction, &mut rng);
    let mut records = Vec::new();
    let mut finished = false;

    for _ in 0..max_steps(sc) {
        if operator.finished(&world, screw, substrate) {
            finished = true;
            break;
        }
        let cmd = operator.command(&world, screw, substrate, params);
        let tau_req = required_torque(&world, screw, substrate, sc.direction);
        let (next, truth) = step_world(&world, cmd, screw, substrate, params, &mut rng)?;
        let measured = read_sensors(truth, params, &mut rng);
        records.push(StepRecord {
            truth,
            measured,
            required_torque: tau_req,
            engaged_depth: next.engaged_depth,
            seated: next.seated,
            slip_started: next.slip_events > world.slip_events,
            spindle_speed: cmd.spindle_speed,
            force_target: f64::NAN,
            phase: None,
        });
        world = next;
    }
    let finished = finished || operator.finished(&world, screw, substrate);

    let report = RunReport {
        outcome: if finished { Outcome::Done } else { Outcome::Timeout },
        fault: None,
        slip_events: world.slip_events,
        detected_slips: 0,
        completion_time: world.time,
        peak_torque: records.iter().map(|r| r.measured.mz).fold(0.0, f64::max),
        final_force: records.last().map_or(0.0, |r| r.measured.fz),
        nu_applied: operator.nu,
        final_engaged_depth: world.engaged_depth,
        seated: world.seated,
    };
    Ok(RunOutput { report, records, world })
}
