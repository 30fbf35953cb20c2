//! Small descriptive-statistics helpers shared by several modules.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (n denominator).
pub fn pop_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator). `NaN` for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn weighted_mean(xs: &[f64], ws: &[f64]) -> f64 {
    let sw: f64 = ws.iter().sum();
    xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw
}

/// Type-7 quantile (linear interpolation between order statistics) of a
/// sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sort_f64(xs: &mut [f64]) {
    xs.sort_by(|a, b| a.total_cmp(b));
}

/// Goodness-of-fit summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn compute(y: &[f64], pred: &[f64]) -> Self {
        let n = y.len() as f64;
        let ym = mean(y);
        let mut sse = 0.0;
        let mut sst = 0.0;
        let mut sae = 0.0;
        for (a, p) in y.iter().zip(pred) {
            sse += (a - p) * (a - p);
            sst += (a - ym) * (a - ym);
            sae += (a - p).abs();
        }
        Metrics {
            r2: 1.0 - sse / sst,
            mae: sae / n,
            rmse: (sse / n).sqrt(),
        }
    }
}

/// Weighted coefficient of determination with a kernel-weighted mean.
pub fn weighted_r2(y: &[f64], pred: &[f64], w: &[f64]) -> f64 {
    let ym = weighted_mean(y, w);
    let mut sse = 0.0;
    let mut sst = 0.0;
    for ((a, p), wi) in y.iter().zip(pred).zip(w) {
        sse += wi * (a - p) * (a - p);
        sst += wi * (a - ym) * (a - ym);
    }
    1.0 - sse / sst
}
