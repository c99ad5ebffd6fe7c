//! Scenario files: every physical, sensing and control parameter of one run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControllerConfig;
use crate::sim::{
    Direction, HeadType, HumanParams, Orientation, ScrewSpec, SimParams, SubstrateKind, SubstrateSpec,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(toml::de::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

/// Who drives the tool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    /// The force-controlled state machine.
    #[default]
    Robot,
    /// The synthetic human operator.
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub direction: Direction,
    /// Simulated time budget (s).
    pub duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub driver: Driver,
    pub screw: ScrewSpec,
    pub substrate: SubstrateSpec,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub human: HumanParams,
}

impl Scenario {
    /// Robot run on an M3 Phillips screw in a vertical plastic prism.
    pub fn robot(direction: Direction) -> Self {
        Self {
            direction,
            duration: 60.0,
            seed: 42,
            driver: Driver::Robot,
            screw: ScrewSpec::m3(HeadType::Phillips),
            substrate: SubstrateSpec::plastic_hole(Orientation::Vertical),
            sim: SimParams::default(),
            controller: ControllerConfig::default(),
            human: HumanParams::default(),
        }
    }

    /// Robot screwing with the torque law off and the force ramped until cam-outs stop.
    pub fn force_ramp() -> Self {
        Self {
            controller: ControllerConfig::force_ramp(),
            ..Self::robot(Direction::Screwing)
        }
    }

    /// Synthetic human run for one recording condition.
    pub fn human(
        head_type: HeadType,
        substrate: SubstrateKind,
        orientation: Orientation,
        direction: Direction,
    ) -> Self {
        let substrate = match substrate {
            SubstrateKind::PlasticHole => SubstrateSpec::plastic_hole(orientation),
            SubstrateKind::Nut => SubstrateSpec::nut(orientation),
        };
        Self {
            direction,
            duration: 90.0,
            seed: 1,
            driver: Driver::Human,
            screw: ScrewSpec::m3(head_type),
            substrate,
            sim: SimParams::default(),
            controller: ControllerConfig::default(),
            human: HumanParams::default(),
        }
    }

    /// Named built-in scenarios.
    pub fn preset(name: &str) -> Option<Self> {
        use Direction::*;
        use HeadType::*;
        use Orientation::*;
        use SubstrateKind::*;
        Some(match name {
            "unscrew" => Self::robot(Unscrewing),
            "screw" => Self::robot(Screwing),
            "force-ramp" => Self::force_ramp(),
            "human-phillips-screwing" => Self::human(Phillips, PlasticHole, Vertical, Screwing),
            "human-phillips-unscrewing" => Self::human(Phillips, PlasticHole, Vertical, Unscrewing),
            "human-phillips-unscrewing-horizontal" => {
                Self::human(Phillips, PlasticHole, Horizontal, Unscrewing)
            }
            "human-hex-screwing" => Self::human(InternalHex, PlasticHole, Vertical, Screwing),
            "human-hex-unscrewing" => Self::human(InternalHex, PlasticHole, Vertical, Unscrewing),
            "human-phillips-nut-screwing" => Self::human(Phillips, Nut, Vertical, Screwing),
            _ => return None,
        })
    }

    pub const PRESETS: &'static [&'static str] = &[
        "unscrew",
        "screw",
        "force-ramp",
        "human-phillips-screwing",
        "human-phillips-unscrewing",
        "human-phillips-unscrewing-horizontal",
        "human-hex-screwing",
        "human-hex-unscrewing",
        "human-phillips-nut-screwing",
    ];

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(ScenarioError::Parse)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|error| ScenarioError::Io {
            path: path.display().to_string(),
            error,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid("duration", format!("must be > 0, got {}", self.duration)));
        }
        self.screw.validate().map_err(from_sim)?;
        self.substrate.validate().map_err(from_sim)?;
        self.sim.validate().map_err(from_sim)?;
        self.controller.validate().map_err(|e| invalid(e.field, e.reason))?;
        let h = &self.human;
        if !(h.regrasp_hz.is_finite() && h.regrasp_hz > 0.0) {
            return Err(invalid("human.regrasp_hz", format!("must be > 0, got {}", h.regrasp_hz)));
        }
        if !(0.0..1.0).contains(&h.regrasp_spread) {
            return Err(invalid("human.regrasp_spread", format!("must be in [0, 1), got {}", h.regrasp_spread)));
        }
        if !(h.duty > 0.0 && h.duty <= 1.0) {
            return Err(invalid("human.duty", format!("must be in (0, 1], got {}", h.duty)));
        }
        let non_negative = [
            ("human.stroke_angle", h.stroke_angle),
            ("human.nu_scale", h.nu_scale),
            ("human.press_swell", h.press_swell),
            ("human.nu_log_std", h.nu_log_std),
            ("human.hold_force_vertical", h.hold_force_vertical),
            ("human.hold_force_horizontal", h.hold_force_horizontal),
            ("human.stop_torque", h.stop_torque),
        ];
        for (field, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn from_sim(e: crate::sim::SimError) -> ScenarioError {
    match e {
        crate::sim::SimError::InvalidParameter { field, reason } => invalid(field, reason),
        other => invalid("sim", other.to_string()),
    }
}
