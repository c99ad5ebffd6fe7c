//! Shape-preserving cubic envelope through peak points.

use super::{AnalysisError, PeakSet};

/// Monotone piecewise-cubic Hermite curve through the peaks of a trace.
///
/// Each segment stays between its two knot values, so the envelope never overshoots the
/// peaks it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFit {
    t: Vec<f64>,
    v: Vec<f64>,
    slopes: Vec<f64>,
}

pub fn fit_envelope(peaks: &PeakSet) -> Result<EnvelopeFit, AnalysisError> {
    let t: Vec<f64> = peaks.peaks.iter().map(|p| p.t).collect();
    let v: Vec<f64> = peaks.peaks.iter().map(|p| p.value).collect();
    EnvelopeFit::through(t, v)
}

impl EnvelopeFit {
    /// Knots must have strictly increasing `t`.
    pub fn through(t: Vec<f64>, v: Vec<f64>) -> Result<Self, AnalysisError> {
        let n = t.len();
        if n < 2 || v.len() != n {
            return Err(AnalysisError::TooFewPeaks { needed: 2, found: n.min(v.len()) });
        }
        let mut h = Vec::with_capacity(n - 1);
        let mut delta = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let hi = t[i + 1] - t[i];
            if hi.is_nan() || hi <= 0.0 {
                return Err(AnalysisError::NonIncreasingTime { index: i + 1 });
            }
            h.push(hi);
            delta.push((v[i + 1] - v[i]) / hi);
        }

        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                let (s0, s1) = (delta[k - 1], delta[k]);
                if s0 == 0.0 || s1 == 0.0 || s0.signum() != s1.signum() {
                    slopes[k] = 0.0;
                } else {
                    // weighted harmonic mean
                    let w0 = 2.0 * h[k] + h[k - 1];
                    let w1 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w0 + w1) / (w0 / s0 + w1 / s1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { t, v, slopes })
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Envelope value at `t`, or `None` outside the knot range.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if !(t >= self.start() && t <= self.end()) {
            return None;
        }
        let k = match self.t.partition_point(|&x| x <= t) {
            0 => 0,
            i => (i - 1).min(self.t.len() - 2),
        };
        let h = self.t[k + 1] - self.t[k];
        let s = (t - self.t[k]) / h;
        let (y0, y1) = (self.v[k], self.v[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * d1;
        // rounding can leave the segment range by an ulp
        let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        Some(value.clamp(lo, hi))
    }

    /// `count` evenly spaced `(t, value)` pairs across the knot range.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        if count == 0 {
            return Vec::new();
        }
        if count == 1 {
            return vec![(self.start(), self.v[0])];
        }
        let span = self.end() - self.start();
        (0..count)
            .map(|i| {
                let t = if i + 1 == count {
                    self.end()
                } else {
                    self.start() + span * i as f64 / (count - 1) as f64
                };
                (t, self.eval(t).expect("inside range"))
            })
            .collect()
    }
}

/// One-sided three-point slope, limited so the end segment stays monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}
