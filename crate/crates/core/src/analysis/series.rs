use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::sim::{Direction, FtSample, HeadType, Orientation, SubstrateKind};

/// Sensor sampling interval (s).
pub const NOMINAL_DT: f64 = 0.01;
/// Allowed relative deviation of each sampling interval.
pub const SPACING_TOLERANCE: f64 = 0.01;

/// Recording condition: what was driven, into what, how and which way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub head_type: HeadType,
    pub substrate: SubstrateKind,
    pub orientation: Orientation,
    pub direction: Direction,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head = match self.head_type {
            HeadType::Phillips => "phillips",
            HeadType::InternalHex => "internal_hex",
            HeadType::MismatchedDriver => "mismatched_driver",
        };
        let substrate = match self.substrate {
            SubstrateKind::PlasticHole => "hole",
            SubstrateKind::Nut => "nut",
        };
        let orientation = match self.orientation {
            Orientation::Vertical => "vertical",
            Orientation::Horizontal => "horizontal",
        };
        let direction = match self.direction {
            Direction::Screwing => "screwing",
            Direction::Unscrewing => "unscrewing",
        };
        write!(f, "{head}, {substrate}, {orientation}, {direction}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Fz,
    Mz,
}

/// Uniformly sampled force/torque recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FtSeries {
    samples: Vec<FtSample>,
    pub condition: Option<Condition>,
}

impl FtSeries {
    /// Checks strictly increasing timestamps at the nominal 100 Hz spacing.
    pub fn new(samples: Vec<FtSample>, condition: Option<Condition>) -> Result<Self, AnalysisError> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.fz.is_finite() && s.mz.is_finite()) {
                return Err(AnalysisError::NonFinite { index: i });
            }
        }
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 {
                return Err(AnalysisError::NonIncreasingTime { index: i + 1 });
            }
            if (dt - NOMINAL_DT).abs() > SPACING_TOLERANCE * NOMINAL_DT {
                return Err(AnalysisError::IrregularSpacing { index: i + 1, dt });
            }
        }
        Ok(Self { samples, condition })
    }

    pub fn samples(&self) -> &[FtSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| match channel {
                Channel::Fz => s.fz,
                Channel::Mz => s.mz,
            })
            .collect()
    }
}
