//! Linear potentiometer-to-force calibration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("need at least 2 calibration pairs, got {0}")]
    TooFewPairs(usize),
    #[error("calibration pair {0} is not finite")]
    NonFinite(usize),
    #[error("potentiometer readings are constant; the fit is singular")]
    ConstantReadings,
}

/// `force = gain * reading + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceCalibration {
    pub gain: f64,
    pub offset: f64,
    /// Root-mean-square residual of the fit (N).
    pub residual_rms: f64,
}

impl ForceCalibration {
    pub fn apply(&self, reading: f64) -> f64 {
        self.gain * reading + self.offset
    }
}

/// Ordinary least-squares line through `(pot_reading, ref_force)` pairs.
pub fn calibrate_force(pairs: &[(f64, f64)]) -> Result<ForceCalibration, CalibrationError> {
    if pairs.len() < 2 {
        return Err(CalibrationError::TooFewPairs(pairs.len()));
    }
    if let Some(i) = pairs.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(CalibrationError::NonFinite(i));
    }
    let fit = crate::fit::ols(pairs.iter().copied()).ok_or(CalibrationError::ConstantReadings)?;
    Ok(ForceCalibration {
        gain: fit.slope,
        offset: fit.intercept,
        residual_rms: (fit.sse / fit.n as f64).sqrt(),
    })
}
