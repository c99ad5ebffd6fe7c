//! TOML report bodies for the `analyze`, `compare` and `calibrate` commands.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    estimate_nu, fit_envelope, mann_whitney_u, regrasp_frequency, torque_drops, AnalysisConfig,
    AnalysisError, BoxStats, Channel, FtSeries, NuEstimate, Peak, UTestResult,
};
use crate::controller::ControllerConfig;

/// Points sampled from the torque envelope.
pub const ENVELOPE_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub samples: usize,
    pub duration: f64,
    /// Absent when fewer than three strokes are found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regrasp_hz: Option<f64>,
    /// Times of torque drops below half the recent maximum (s).
    pub slip_times: Vec<f64>,
    pub nu: NuEstimate,
    /// `[t, torque]` pairs; empty with fewer than two torque peaks.
    pub torque_envelope: Vec<[f64; 2]>,
    pub torque_peaks: Vec<Peak>,
    pub force_peaks: Vec<Peak>,
}

pub fn analyze(
    series: &FtSeries,
    cfg: &AnalysisConfig,
    controller: &ControllerConfig,
) -> Result<AnalyzeReport, AnalysisError> {
    let nu = estimate_nu(series)?;
    let torque_peaks = cfg.peaks(series, Channel::Mz)?;
    let force_peaks = cfg.peaks(series, Channel::Fz)?;
    let regrasp_hz = match regrasp_frequency(series, Channel::Fz, cfg) {
        Ok(hz) => Some(hz),
        Err(AnalysisError::TooFewPeaks { .. }) => None,
        Err(e) => return Err(e),
    };
    let torque_envelope = match fit_envelope(&torque_peaks) {
        Ok(env) => env.sample(ENVELOPE_SAMPLES).into_iter().map(|(t, v)| [t, v]).collect(),
        Err(AnalysisError::TooFewPeaks { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let samples = series.samples();
    Ok(AnalyzeReport {
        samples: samples.len(),
        duration: samples.last().map_or(0.0, |s| s.t) - samples.first().map_or(0.0, |s| s.t),
        regrasp_hz,
        slip_times: torque_drops(series, controller),
        nu,
        torque_envelope,
        torque_peaks: torque_peaks.peaks,
        force_peaks: force_peaks.peaks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNu {
    pub file: String,
    pub nu: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub dir: String,
    pub summary: BoxStats,
    pub logs: Vec<LogNu>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub test: UTestResult,
    pub group_a: GroupReport,
    pub group_b: GroupReport,
}

fn group(dir: &str, logs: &[(String, FtSeries)]) -> Result<GroupReport, AnalysisError> {
    let logs = logs
        .iter()
        .map(|(file, series)| {
            let est = estimate_nu(series)?;
            Ok(LogNu {
                file: file.clone(),
                nu: est.nu,
                r: est.r,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    let values: Vec<f64> = logs.iter().map(|l| l.nu).collect();
    Ok(GroupReport {
        dir: dir.to_string(),
        summary: BoxStats::from_values(&values)?,
        logs,
    })
}

/// One ratio per log, then a rank test between the groups.
pub fn compare(
    (dir_a, logs_a): (&str, &[(String, FtSeries)]),
    (dir_b, logs_b): (&str, &[(String, FtSeries)]),
) -> Result<CompareReport, AnalysisError> {
    let group_a = group(dir_a, logs_a)?;
    let group_b = group(dir_b, logs_b)?;
    let nu = |g: &GroupReport| g.logs.iter().map(|l| l.nu).collect::<Vec<_>>();
    Ok(CompareReport {
        test: mann_whitney_u(&nu(&group_a), &nu(&group_b))?,
        group_a,
        group_b,
    })
}

pub fn to_toml<T: Serialize>(report: &T) -> String {
    toml::to_string(report).expect("report serialises")
}
