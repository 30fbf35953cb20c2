//! Penalised cubic B-spline smoother for SHAP dependence curves and
//! zero-crossing (transition point) detection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sort_f64};

const DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    Fixed(f64),
    Gcv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamFit {
    /// Full clamped knot vector (boundary knots repeated DEGREE + 1 times).
    pub knots: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    pub gcv: f64,
    pub range: (f64, f64),
}

/// Values of all B-spline basis functions at `x` (clamped to the knot span).
fn basis(knots: &[f64], nb: usize, x: f64) -> Vec<f64> {
    let lo = knots[DEGREE];
    let hi = knots[nb];
    let x = x.clamp(lo, hi);
    // span index s with knots[s] <= x < knots[s+1], using the last span at hi
    let mut s = DEGREE;
    while s + 1 < nb && knots[s + 1] <= x {
        s += 1;
    }
    let mut n = vec![0.0; DEGREE + 1];
    n[0] = 1.0;
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    for j in 1..=DEGREE {
        left[j] = x - knots[s + 1 - j];
        right[j] = knots[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let tmp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    let mut out = vec![0.0; nb];
    for (j, v) in n.into_iter().enumerate() {
        out[s - DEGREE + j] = v;
    }
    out
}

/// Second divided differences of the coefficients over the Greville
/// abscissae; linear functions lie exactly in the null space even for
/// unevenly spaced knots.
fn penalty(knots: &[f64], nb: usize) -> DMatrix<f64> {
    let g: Vec<f64> = (0..nb).map(|j| knots[j + 1..=j + DEGREE].iter().sum::<f64>() / DEGREE as f64).collect();
    let mut d = DMatrix::zeros(nb - 2, nb);
    for j in 0..nb - 2 {
        let a = 1.0 / (g[j + 1] - g[j]);
        let b = 1.0 / (g[j + 2] - g[j + 1]);
        d[(j, j)] = a;
        d[(j, j + 1)] = -a - b;
        d[(j, j + 2)] = b;
    }
    d.transpose() * d
}

struct Solved {
    coef: DVector<f64>,
    edf: f64,
    rss: f64,
}

fn solve(btb: &DMatrix<f64>, bty: &DVector<f64>, pen: &DMatrix<f64>, b: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<Solved> {
    let a = btb + pen * lambda;
    let chol = a.cholesky()?;
    let coef = chol.solve(bty);
    let edf = chol.solve(btb).trace();
    let rss = (y - b * &coef).norm_squared();
    coef.iter().all(|v| v.is_finite()).then_some(Solved { coef, edf, rss })
}

fn gcv_score(n: f64, s: &Solved) -> f64 {
    let denom = n - s.edf;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        n * s.rss / (denom * denom)
    }
}

/// Fits a penalised cubic spline with `n_knots` quantile-spaced knots
/// (boundaries included). λ is fixed or chosen by generalised
/// cross-validation over a log grid refined by golden-section search.
pub fn gam_fit(x: &[f64], phi: &[f64], n_knots: usize, smoothing: Smoothing) -> Result<GamFit> {
    if x.len() != phi.len() {
        return Err(Error::Structure("x and phi must have equal length".into()));
    }
    if n_knots < 2 {
        return Err(Error::Validation("need at least 2 knots".into()));
    }
    if x.len() < n_knots + 4 {
        return Err(Error::Validation(format!("need at least {} points for {n_knots} knots", n_knots + 4)));
    }
    if x.iter().chain(phi).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite input to smoother".into()));
    }
    let mut sorted = x.to_vec();
    sort_f64(&mut sorted);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return Err(Error::Validation("degenerate x: all values equal".into()));
    }
    let mut inner: Vec<f64> = (0..n_knots).map(|k| quantile_sorted(&sorted, k as f64 / (n_knots - 1) as f64)).collect();
    inner.dedup();
    let mut knots = vec![lo; DEGREE];
    knots.extend(&inner);
    knots.extend(std::iter::repeat_n(hi, DEGREE));
    let nb = knots.len() - DEGREE - 1;
    let n = x.len();
    let mut b = DMatrix::zeros(n, nb);
    for (i, &xi) in x.iter().enumerate() {
        for (j, v) in basis(&knots, nb, xi).into_iter().enumerate() {
            b[(i, j)] = v;
        }
    }
    let y = DVector::from_column_slice(phi);
    let btb = b.transpose() * &b;
    let bty = b.transpose() * &y;
    let pen = penalty(&knots, nb);
    let nf = n as f64;
    let (lambda, s) = match smoothing {
        Smoothing::Fixed(l) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Validation(format!("lambda must be finite and >= 0, got {l}")));
            }
            let s = solve(&btb, &bty, &pen, &b, &y, l)
                .ok_or_else(|| Error::Numerical(format!("smoother system is singular at lambda = {l}")))?;
            (l, s)
        }
        Smoothing::Gcv => {
            let scale = btb.trace() / pen.trace().max(f64::MIN_POSITIVE);
            let eval = |ll: f64| {
                let l = scale * 10f64.powf(ll);
                solve(&btb, &bty, &pen, &b, &y, l).map(|s| (gcv_score(nf, &s), l, s))
            };
            let grid: Vec<f64> = (0..=48).map(|k| -8.0 + k as f64 * 0.25).collect();
            let mut best: Option<(f64, f64)> = None;
            for &g in &grid {
                if let Some((score, _, _)) = eval(g) {
                    if best.is_none_or(|(_, bs)| score < bs) {
                        best = Some((g, score));
                    }
                }
            }
            let (g0, _) = best.ok_or_else(|| Error::Numerical("smoother system is singular for every lambda".into()))?;
            let (mut a, mut c) = (g0 - 0.25, g0 + 0.25);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            let f = |g: f64| eval(g).map_or(f64::INFINITY, |e| e.0);
            for _ in 0..40 {
                let (p, q) = (c - r * (c - a), a + r * (c - a));
                if f(p) <= f(q) {
                    c = q;
                } else {
                    a = p;
                }
            }
            let gm = 0.5 * (a + c);
            let pick = if f(gm) <= f(g0) { gm } else { g0 };
            let (_, l, s) = eval(pick).ok_or_else(|| Error::Numerical("smoother failed at the selected lambda".into()))?;
            (l, s)
        }
    };
    Ok(GamFit {
        knots,
        coefficients: s.coef.iter().copied().collect(),
        lambda,
        edf: s.edf,
        gcv: gcv_score(nf, &s),
        range: (lo, hi),
    })
}

impl GamFit {
    /// Curve value at `x` (clamped to the data range).
    pub fn eval(&self, x: f64) -> f64 {
        let nb = self.coefficients.len();
        basis(&self.knots, nb, x).iter().zip(&self.coefficients).map(|(b, c)| b * c).sum()
    }
}

const SCAN_POINTS: usize = 4096;

/// Smallest x in the data range where the fitted curve changes sign,
/// refined by bisection to 1e-6 of the range.
pub fn transition_point(fit: &GamFit) -> Option<f64> {
    let (lo, hi) = fit.range;
    let tol = 1e-6 * (hi - lo);
    let mut last_sign = 0.0;
    let mut zero_start: Option<f64> = None;
    let mut prev_x = lo;
    for k in 0..=SCAN_POINTS {
        let t = lo + (hi - lo) * k as f64 / SCAN_POINTS as f64;
        let v = fit.eval(t);
        if v == 0.0 {
            if zero_start.is_none() {
                zero_start = Some(t);
            }
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            if let Some(z) = zero_start {
                return Some(z);
            }
            let (mut a, mut b) = (prev_x, t);
            let sa = last_sign;
            while b - a > tol {
                let m = 0.5 * (a + b);
                let vm = fit.eval(m);
                if vm == 0.0 {
                    return Some(m);
                }
                if vm.signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        last_sign = s;
        zero_start = None;
        prev_x = t;
    }
    None
}
