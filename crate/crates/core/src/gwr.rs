//! Geographically weighted linear regression with a bi-square kernel and
//! AICc bandwidth selection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel radius rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    /// Fixed bandwidth in metres.
    Fixed(f64),
    /// Bandwidth = distance to the k-th nearest location, counting the
    /// location itself as the first.
    Adaptive(usize),
}

impl KernelSpec {
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        match *self {
            KernelSpec::Fixed(b) if !(b > 0.0) || !b.is_finite() => {
                Err(Error::Validation(format!("fixed bandwidth must be positive and finite, got {b}")))
            }
            KernelSpec::Adaptive(k) if k < p + 2 => {
                Err(Error::Validation(format!("adaptive k = {k} is below p + 2 = {}", p + 2)))
            }
            KernelSpec::Adaptive(k) if k > n => Err(Error::Validation(format!("adaptive k = {k} exceeds n = {n}"))),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Fixed(b) => write!(f, "fixed:{b}"),
            KernelSpec::Adaptive(k) => write!(f, "adaptive:{k}"),
        }
    }
}

/// (1 − (d/b)²)² inside the bandwidth, 0 outside.
pub fn bisquare_weight(d: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Validation(format!("bandwidth must be positive, got {b}")));
    }
    Ok(bisquare_unchecked(d, b))
}

#[inline]
pub(crate) fn bisquare_unchecked(d: f64, b: f64) -> f64 {
    if d > b {
        0.0
    } else {
        let u = d / b;
        let t = 1.0 - u * u;
        t * t
    }
}

pub(crate) fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Indices of all locations sorted by distance from `i` (ties by index);
/// `i` itself comes first.
pub(crate) fn sorted_neighbors(coords: &[(f64, f64)], i: usize) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = coords.iter().enumerate().map(|(j, &c)| (j, distance(coords[i], c))).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then((a.0 != i).cmp(&(b.0 != i))).then(a.0.cmp(&b.0)));
    v
}

/// Kernel weights of every row as seen from location `i`.
pub fn kernel_weights(coords: &[(f64, f64)], i: usize, kernel: KernelSpec) -> Vec<f64> {
    let b = match kernel {
        KernelSpec::Fixed(b) => b,
        KernelSpec::Adaptive(k) => sorted_neighbors(coords, i)[k - 1].1,
    };
    coords
        .iter()
        .map(|&c| {
            let d = distance(coords[i], c);
            if b > 0.0 {
                bisquare_unchecked(d, b)
            } else if d == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Column standardisation used internally for conditioning.
#[derive(Debug, Clone)]
struct Scaling {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

fn design(x: &[Vec<f64>], y: &[f64], coords: &[(f64, f64)]) -> Result<(DMatrix<f64>, Scaling)> {
    let n = x.len();
    if y.len() != n || coords.len() != n {
        return Err(Error::Structure("x, y and coords must have equal length".into()));
    }
    let p = x.first().map(|r| r.len()).unwrap_or(0);
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Structure("ragged predictor rows".into()));
    }
    if n <= p + 2 {
        return Err(Error::Validation(format!("need n > p + 2 (n = {n}, p = {p})")));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("predictors and response must be finite".into()));
    }
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        mean[j] = crate::stats::mean(&col);
        sd[j] = crate::stats::pop_variance(&col).sqrt();
        if !(sd[j] > 1e-12 * mean[j].abs().max(1.0)) {
            return Err(Error::Validation(format!("predictor {j} is constant; the intercept is added internally")));
        }
    }
    let m = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { (x[i][j - 1] - mean[j - 1]) / sd[j - 1] });
    Ok((m, Scaling { mean, sd }))
}

fn back_transform(beta: &DVector<f64>, s: &Scaling) -> Vec<f64> {
    let p = s.mean.len();
    let mut out = vec![0.0; p + 1];
    out[0] = beta[0];
    for j in 0..p {
        out[j + 1] = beta[j + 1] / s.sd[j];
        out[0] -= beta[j + 1] * s.mean[j] / s.sd[j];
    }
    out
}

/// Weighted least-squares solve at one location. Returns the standardised
/// coefficients and the hat row S_i.
fn local_solve(xm: &DMatrix<f64>, y: &[f64], w: &[f64], i: usize) -> Result<(DVector<f64>, Vec<f64>)> {
    let (n, q) = xm.shape();
    let mut xtwx = DMatrix::<f64>::zeros(q, q);
    let mut xtw = DMatrix::<f64>::zeros(q, n);
    let mut used = 0usize;
    for r in 0..n {
        if w[r] <= 0.0 {
            continue;
        }
        used += 1;
        for a in 0..q {
            let xa = xm[(r, a)] * w[r];
            xtw[(a, r)] = xa;
            for b in 0..q {
                xtwx[(a, b)] += xa * xm[(r, b)];
            }
        }
    }
    let singular = || {
        Error::Numerical(format!(
            "singular weighted normal matrix at location {i}; try a larger bandwidth"
        ))
    };
    if used < q {
        return Err(singular());
    }
    let chol = xtwx.clone().cholesky().ok_or_else(singular)?;
    let l = chol.l();
    let dmax = (0..q).map(|k| l[(k, k)]).fold(0.0, f64::max);
    let dmin = (0..q).map(|k| l[(k, k)]).fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-7 * dmax) {
        return Err(singular());
    }
    let xtwy = &xtw * DVector::from_column_slice(y);
    let beta = chol.solve(&xtwy);
    // S_i = x_iᵀ (XᵀWX)⁻¹ XᵀW
    let xi = xm.row(i).transpose();
    let a = chol.solve(&xi);
    let hat = (a.transpose() * &xtw).iter().copied().collect();
    Ok((beta, hat))
}

#[derive(Debug, Clone)]
pub struct GwrFit {
    pub kernel: KernelSpec,
    /// Per location: intercept followed by one slope per predictor, in
    /// original predictor units.
    pub betas: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub hat_diag: Vec<f64>,
    pub local_r2: Vec<f64>,
    pub tr_s: f64,
    pub rss: f64,
    pub aicc: f64,
}

/// Small-sample corrected AIC of a linear smoother.
pub fn aicc(n: usize, rss: f64, tr_s: f64) -> f64 {
    let n = n as f64;
    let sigma = (rss / n).sqrt();
    if n - 2.0 - tr_s <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * n * sigma.ln() + n * (2.0 * std::f64::consts::PI).ln() + n * (n + tr_s) / (n - 2.0 - tr_s)
}

/// Fits one weighted least-squares model per location. `x` is row-major
/// (n rows of p predictors, no intercept column).
pub fn gwr_fit(x: &[Vec<f64>], y: &[f64], coords: &[(f64, f64)], kernel: KernelSpec) -> Result<GwrFit> {
    let (xm, scaling) = design(x, y, coords)?;
    let (n, q) = xm.shape();
    kernel.validate(n, q - 1)?;
    let locals: Vec<(Vec<f64>, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let w = kernel_weights(coords, i, kernel);
            let (beta, hat) = local_solve(&xm, y, &w, i)?;
            let pred = |r: usize| (0..q).map(|a| xm[(r, a)] * beta[a]).sum::<f64>();
            let fitted = pred(i);
            let sw: f64 = w.iter().sum();
            let ybar = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw;
            let (mut sse, mut sst) = (0.0, 0.0);
            for r in 0..n {
                if w[r] > 0.0 {
                    sse += w[r] * (y[r] - pred(r)).powi(2);
                    sst += w[r] * (y[r] - ybar).powi(2);
                }
            }
            let r2 = if sst > 0.0 { 1.0 - sse / sst } else if sse <= 1e-24 { 1.0 } else { f64::NEG_INFINITY };
            Ok((back_transform(&beta, &scaling), fitted, hat[i], r2))
        })
        .collect::<Result<_>>()?;
    let mut fit = GwrFit {
        kernel,
        betas: Vec::with_capacity(n),
        fitted: Vec::with_capacity(n),
        residuals: Vec::with_capacity(n),
        hat_diag: Vec::with_capacity(n),
        local_r2: Vec::with_capacity(n),
        tr_s: 0.0,
        rss: 0.0,
        aicc: 0.0,
    };
    for (i, (b, f, h, r2)) in locals.into_iter().enumerate() {
        fit.betas.push(b);
        fit.fitted.push(f);
        fit.residuals.push(y[i] - f);
        fit.hat_diag.push(h);
        fit.local_r2.push(r2);
    }
    fit.tr_s = fit.hat_diag.iter().sum();
    fit.rss = fit.residuals.iter().map(|e| e * e).sum();
    fit.aicc = aicc(n, fit.rss, fit.tr_s);
    Ok(fit)
}

/// Row i of the GWR hat matrix.
pub fn hat_row(x: &[Vec<f64>], y: &[f64], coords: &[(f64, f64)], kernel: KernelSpec, i: usize) -> Result<Vec<f64>> {
    let (xm, _) = design(x, y, coords)?;
    kernel.validate(xm.nrows(), xm.ncols() - 1)?;
    let w = kernel_weights(coords, i, kernel);
    Ok(local_solve(&xm, y, &w, i)?.1)
}

/// Ordinary least squares: intercept followed by slopes.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let coords = vec![(0.0, 0.0); y.len()];
    let (xm, scaling) = design(x, y, &coords)?;
    let w = vec![1.0; y.len()];
    let (beta, _) = local_solve(&xm, y, &w, 0)?;
    Ok(back_transform(&beta, &scaling))
}

/// Evaluates a coefficient vector (intercept first) on a predictor row.
pub fn predict_linear(beta: &[f64], row: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthTrace {
    pub kernel: KernelSpec,
    /// `None` when the fit was singular for this candidate.
    pub aicc: Option<f64>,
}

/// Picks the candidate with the lowest AICc (ties toward the earlier
/// candidate). Singular candidates are recorded and skipped.
pub fn gwr_bandwidth_search(
    x: &[Vec<f64>],
    y: &[f64],
    coords: &[(f64, f64)],
    candidates: &[KernelSpec],
) -> Result<(KernelSpec, Vec<BandwidthTrace>)> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidate bandwidths".into()));
    }
    let mut trace = Vec::with_capacity(candidates.len());
    let mut best: Option<(KernelSpec, f64)> = None;
    for &k in candidates {
        let a = match gwr_fit(x, y, coords, k) {
            Ok(f) if f.aicc.is_finite() => Some(f.aicc),
            Ok(_) | Err(Error::Numerical(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(v) = a {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        trace.push(BandwidthTrace { kernel: k, aicc: a });
    }
    best.map(|(k, _)| (k, trace))
        .ok_or_else(|| Error::Numerical("every candidate bandwidth gave a singular fit".into()))
}

/// Golden-section search for a fixed bandwidth in `[lo, hi]` minimising
/// AICc, stopping when the bracket is narrower than `tol` metres.
pub fn gwr_golden_search(
    x: &[Vec<f64>],
    y: &[f64],
    coords: &[(f64, f64)],
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(KernelSpec, Vec<BandwidthTrace>)> {
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::Validation("golden search needs 0 < lo < hi and tol > 0".into()));
    }
    let mut trace = Vec::new();
    let mut eval = |b: f64| -> f64 {
        let a = gwr_fit(x, y, coords, KernelSpec::Fixed(b)).ok().map(|f| f.aicc).filter(|a| a.is_finite());
        trace.push(BandwidthTrace { kernel: KernelSpec::Fixed(b), aicc: a });
        a.unwrap_or(f64::INFINITY)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    let (best, fbest) = if fc <= fd { (c, fc) } else { (d, fd) };
    if !fbest.is_finite() {
        return Err(Error::Numerical("every bandwidth in the search range gave a singular fit".into()));
    }
    Ok((KernelSpec::Fixed(best), trace))
}
