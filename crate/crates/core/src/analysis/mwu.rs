//! Two-sided Mann–Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::AnalysisError;

/// Smaller group size up to which tie-free samples get the exact null distribution.
pub const EXACT_MAX_SMALLER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U statistic of the first sample: pairs `(x, y)` with `x > y`, ties counting half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: UTestMethod,
}

/// Midranks (1-based) of the pooled sample, in input order.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite { index: 0 });
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum: f64 = ranks[..n].iter().sum();
    let u = rank_sum - (n * (n + 1)) as f64 / 2.0;

    let tie_term = tie_sum(&pooled);
    if n.min(m) <= EXACT_MAX_SMALLER && tie_term == 0.0 {
        // tie-free, so u is an integer
        let p = exact_p(u.round() as usize, n, m);
        return Ok(UTestResult { u, p, method: UTestMethod::Exact });
    }

    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let mean = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(UTestResult {
        u,
        p: p.clamp(f64::MIN_POSITIVE, 1.0),
        method: UTestMethod::NormalApprox,
    })
}

/// Σ (t³ − t) over tie groups.
fn tie_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        total += t * t * t - t;
        i = j;
    }
    total
}

/// Number of rank arrangements giving each U value for group sizes `n` and `m`.
///
/// Coefficients of the Gaussian binomial `[n + m choose n]_q`, built one factor
/// `(1 − q^(m+k)) / (1 − q^k)` at a time.
pub fn u_distribution(n: usize, m: usize) -> Vec<u128> {
    let (small, large) = if n <= m { (n, m) } else { (m, n) };
    let len = small * large + 1;
    let mut c = vec![0i128; len];
    c[0] = 1;
    for k in 1..=small {
        let up = large + k;
        for i in (up..len).rev() {
            c[i] -= c[i - up];
        }
        for i in k..len {
            c[i] += c[i - k];
        }
    }
    c.into_iter().map(|x| x as u128).collect()
}

fn exact_p(u: usize, n: usize, m: usize) -> f64 {
    let counts = u_distribution(n, m);
    let total: u128 = counts.iter().sum();
    let below: u128 = counts[..=u].iter().sum();
    let above: u128 = counts[u..].iter().sum();
    let tail = below.min(above);
    (2.0 * tail as f64 / total as f64).min(1.0)
}
