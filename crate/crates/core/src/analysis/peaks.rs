//! Local maxima with prominence and minimum-separation filtering.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Channel, FtSeries};
use crate::controller::{detect_camout, ControllerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub t: f64,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub channel: Channel,
    /// Sorted by index.
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

/// Interior maxima of `values` as `(index, prominence)`.
///
/// A flat top counts once, at its first sample, when both sides fall away.
pub fn raw_maxima(values: &[f64]) -> Vec<(usize, f64)> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i + 1;
            while j < n && values[j] == values[i] {
                j += 1;
            }
            if j < n && values[j] < values[i] {
                out.push((i, prominence(values, i, j)));
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Height above the higher of the two lowest points reached before the signal climbs above
/// the peak on either side. `plateau_end` is the first index after the flat top.
fn prominence(values: &[f64], peak: usize, plateau_end: usize) -> f64 {
    let top = values[peak];
    let mut left_min = top;
    for &v in values[..peak].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &values[plateau_end..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

/// Local maxima of one channel, keeping peaks with at least `min_prominence` and at least
/// `min_separation` seconds from any taller kept peak. Equal heights keep the earlier peak.
pub fn local_maxima(
    series: &FtSeries,
    channel: Channel,
    min_prominence: f64,
    min_separation: f64,
) -> Result<PeakSet, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let values = series.channel(channel);
    let times = series.times();
    let mut candidates: Vec<Peak> = raw_maxima(&values)
        .into_iter()
        .filter(|&(_, p)| p >= min_prominence)
        .map(|(index, prominence)| Peak {
            index,
            t: times[index],
            value: values[index],
            prominence,
        })
        .collect();

    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut kept: Vec<Peak> = Vec::with_capacity(candidates.len());
    for c in candidates {
        // small slack so samples exactly `min_separation` apart survive rounding
        let clash = kept
            .iter()
            .any(|k| (k.t - c.t).abs() < min_separation - 1e-9);
        if !clash {
            kept.push(c);
        }
    }
    kept.sort_by_key(|p| p.index);
    Ok(PeakSet { channel, peaks: kept })
}

/// Start times of torque drops below `theta_slip` of the windowed maximum.
pub fn torque_drops(series: &FtSeries, cfg: &ControllerConfig) -> Vec<f64> {
    let torque = series.channel(Channel::Mz);
    let mut events = Vec::new();
    let mut active = false;
    for (i, s) in series.samples().iter().enumerate() {
        let start = (i + 1).saturating_sub(cfg.window);
        let hit = detect_camout(&torque[start..=i], cfg);
        if hit && !active {
            events.push(s.t);
        }
        active = hit;
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FtSample;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> FtSeries {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| FtSample { t: i as f64 * 0.01, fz: v, mz: v })
            .collect();
        FtSeries::new(samples, None).unwrap()
    }

    #[test]
    fn monotone_has_no_peaks() {
        let up: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(local_maxima(&series(&up), Channel::Mz, 0.0, 0.0).unwrap().is_empty());
        let flat = vec![2.0; 20];
        assert!(local_maxima(&series(&flat), Channel::Mz, 0.0, 0.0).unwrap().is_empty());
    }

    #[test]
    fn plateau_reports_its_start() {
        let p = local_maxima(&series(&[0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0]), Channel::Fz, 0.0, 0.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.peaks[0].index, 2);
        assert_eq!(p.peaks[0].prominence, 2.0);
    }

    #[test]
    fn empty_series_is_an_error() {
        let s = FtSeries::new(vec![], None).unwrap();
        assert_eq!(local_maxima(&s, Channel::Mz, 0.0, 0.0), Err(AnalysisError::EmptySeries));
    }

    #[test]
    fn prominence_filter() {
        // small bump riding on the flank of a big one
        let v = [0.0, 5.0, 4.0, 4.2, 3.0, 0.0];
        let all = raw_maxima(&v);
        assert_eq!(all.len(), 2);
        assert!((all[1].1 - 0.2).abs() < 1e-12);
        let p = local_maxima(&series(&v), Channel::Mz, 0.5, 0.0).unwrap();
        assert_eq!(p.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn separation_keeps_taller_then_earlier() {
        let v = [0.0, 3.0, 0.0, 3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let p = local_maxima(&series(&v), Channel::Mz, 0.0, 0.03).unwrap();
        // 5 is tallest, suppresses 3 at index 3; index 1 survives (4 samples away)
        assert_eq!(p.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1, 5, 10]);
        let tie = [0.0, 2.0, 0.0, 2.0, 0.0];
        let p = local_maxima(&series(&tie), Channel::Mz, 0.0, 0.05).unwrap();
        assert_eq!(p.peaks.iter().map(|p| p.index).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn half_wave_sine_peak_count() {
        // oracle: sin(2π f t) peaks at t = (k + 1/4) / f; count those inside [0, 10)
        let f = 1.3;
        let values: Vec<f64> = (0..1000)
            .map(|i| (std::f64::consts::TAU * f * i as f64 * 0.01).sin().max(0.0))
            .collect();
        let expected = (0..100).filter(|k| (*k as f64 + 0.25) / f < 9.99).count();
        assert_eq!(expected, 13);
        let p = local_maxima(&series(&values), Channel::Mz, 0.1, 0.3).unwrap();
        assert!((p.len() as i64 - expected as i64).abs() <= 1, "{}", p.len());
    }

    #[test]
    fn drops_are_flagged_once_per_event() {
        let mut v = vec![0.15; 40];
        for x in v.iter_mut().skip(20).take(5) {
            *x = 0.0;
        }
        let s = series(&v);
        let events = torque_drops(&s, &ControllerConfig::default());
        assert_eq!(events.len(), 1);
        assert!((events[0] - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn peaks_are_local_maxima(values in proptest::collection::vec(0.0f64..5.0, 3..120), prom in 0.0f64..2.0) {
            // quantise to get plateaus too
            let values: Vec<f64> = values.iter().map(|v| (v * 2.0).round() / 2.0).collect();
            let p = local_maxima(&series(&values), Channel::Mz, prom, 0.0).unwrap();
            for peak in &p.peaks {
                let i = peak.index;
                prop_assert!(i > 0 && values[i] > values[i - 1]);
                let next = values[i..].iter().find(|&&v| v != values[i]);
                prop_assert!(matches!(next, Some(&v) if v < values[i]));
                prop_assert!(peak.prominence >= prom);
            }
        }
    }
}
