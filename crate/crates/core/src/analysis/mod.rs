//! Processing of force/torque recordings: peaks and their envelope, regrasp rate,
//! force/torque ratio, and group comparisons.

mod envelope;
mod mwu;
mod peaks;
mod series;
mod summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use envelope::{fit_envelope, EnvelopeFit};
pub use mwu::{mann_whitney_u, midranks, u_distribution, UTestMethod, UTestResult, EXACT_MAX_SMALLER};
pub use peaks::{local_maxima, raw_maxima, torque_drops, Peak, PeakSet};
pub use series::{Channel, Condition, FtSeries, NOMINAL_DT, SPACING_TOLERANCE};
pub use summary::{quantile_sorted, summarize_conditions, BoxStats};

use crate::fit::ols;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("series is empty")]
    EmptySeries,
    #[error("sample set is empty")]
    EmptySample,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("timestamp at index {index} does not increase")]
    NonIncreasingTime { index: usize },
    #[error("sampling interval {dt} s at index {index} is off the 100 Hz grid")]
    IrregularSpacing { index: usize, dt: f64 },
    #[error("need at least {needed} peaks, found {found}")]
    TooFewPeaks { needed: usize, found: usize },
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("torque has zero variance; force/torque ratio is undefined")]
    DegenerateFit,
}

/// Sensor noise levels and peak spacing used for the default peak filters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub force_noise_std: f64,
    pub torque_noise_std: f64,
    /// Minimum time between peaks (s).
    pub min_separation: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            force_noise_std: 0.1,
            torque_noise_std: 0.003,
            min_separation: 0.4,
        }
    }
}

impl AnalysisConfig {
    /// Three times the channel's noise standard deviation.
    pub fn default_prominence(&self, channel: Channel) -> f64 {
        3.0 * match channel {
            Channel::Fz => self.force_noise_std,
            Channel::Mz => self.torque_noise_std,
        }
    }

    pub fn peaks(&self, series: &FtSeries, channel: Channel) -> Result<PeakSet, AnalysisError> {
        local_maxima(series, channel, self.default_prominence(channel), self.min_separation)
    }
}

/// Frequency of the dominant stroke pattern: one over the median peak spacing.
pub fn regrasp_frequency(
    series: &FtSeries,
    channel: Channel,
    cfg: &AnalysisConfig,
) -> Result<f64, AnalysisError> {
    let peaks = cfg.peaks(series, channel)?;
    if peaks.len() < 3 {
        return Err(AnalysisError::TooFewPeaks {
            needed: 3,
            found: peaks.len(),
        });
    }
    let mut gaps: Vec<f64> = peaks.peaks.windows(2).map(|w| w[1].t - w[0].t).collect();
    gaps.sort_by(f64::total_cmp);
    Ok(1.0 / quantile_sorted(&gaps, 0.5))
}

/// Force/torque ratio of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    /// Slope of |F| on |τ| (1/m).
    pub nu: f64,
    /// Force at zero torque (N).
    pub intercept: f64,
    /// Pearson correlation of |F| and |τ|.
    pub r: f64,
    pub n: usize,
    /// Slope of the fit forced through the origin (1/m).
    pub nu_through_origin: f64,
}

pub fn estimate_nu(series: &FtSeries) -> Result<NuEstimate, AnalysisError> {
    let n = series.len();
    if n < 3 {
        return Err(AnalysisError::TooFewSamples { needed: 3, found: n });
    }
    let points = series.samples().iter().map(|s| (s.mz.abs(), s.fz.abs()));
    let fit = ols(points.clone()).ok_or(AnalysisError::DegenerateFit)?;
    let (sxy, sxx) = points.fold((0.0, 0.0), |(sxy, sxx), (x, y)| (sxy + x * y, sxx + x * x));
    Ok(NuEstimate {
        nu: fit.slope,
        intercept: fit.intercept,
        r: fit.r,
        n,
        nu_through_origin: sxy / sxx,
    })
}
