use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Box-plot statistics for one group of ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// Tukey box: whiskers reach the furthest data inside 1.5 IQR of the quartiles.
    pub fn from_values(values: &[f64]) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite { index: 0 });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let median = quantile_sorted(&sorted, 0.5);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside = sorted.iter().copied().filter(|v| *v >= lo_fence && *v <= hi_fence);
        let whisker_low = inside.clone().fold(q1, f64::min);
        let whisker_high = inside.fold(q3, f64::max);
        let outliers = sorted
            .iter()
            .copied()
            .filter(|v| *v < lo_fence || *v > hi_fence)
            .collect();
        Ok(Self {
            n: sorted.len(),
            median,
            q1,
            q3,
            whisker_low,
            whisker_high,
            outliers,
        })
    }
}

/// Box statistics for every group.
pub fn summarize_conditions<K: Ord + Clone>(
    groups: &BTreeMap<K, Vec<f64>>,
) -> Result<BTreeMap<K, BoxStats>, AnalysisError> {
    groups
        .iter()
        .map(|(k, v)| Ok((k.clone(), BoxStats::from_values(v)?)))
        .collect()
}
