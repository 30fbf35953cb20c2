//! Zonal aggregation and the LST–UTCI comparison analytics: standardized
//! mismatch, bivariate tercile classes, binned quantile curves and LOWESS.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::raster::Grid;
use crate::stats::{mean, pop_variance, quantile_sorted, sort_f64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneStat {
    /// NaN when no cell survives masking.
    pub mean: f64,
    /// Population standard deviation; NaN when empty.
    pub sd: f64,
    pub count: usize,
}

/// Mean, sd and count of `grid` per zone. A cell is dropped when it is
/// nodata in `grid` or equals 1 in any mask. Every zone present in
/// `zone_raster` appears in the result, with count 0 if fully masked.
pub fn zonal_stats(grid: &Grid, zone_raster: &Grid, masks: &[&Grid]) -> Result<BTreeMap<i64, ZoneStat>> {
    grid.ensure_aligned(zone_raster, "zones vs values")?;
    for m in masks {
        grid.ensure_aligned(m, "mask vs values")?;
    }
    let mut vals: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for i in 0..grid.len() {
        let z = zone_raster.values()[i];
        if zone_raster.is_nodata(z) {
            continue;
        }
        let list = vals.entry(z as i64).or_default();
        let v = grid.values()[i];
        if grid.is_nodata(v) {
            continue;
        }
        if masks.iter().any(|m| m.values()[i] == 1.0) {
            continue;
        }
        list.push(v);
    }
    Ok(vals
        .into_iter()
        .map(|(z, v)| {
            let s = if v.is_empty() {
                ZoneStat { mean: f64::NAN, sd: f64::NAN, count: 0 }
            } else {
                ZoneStat { mean: mean(&v), sd: pop_variance(&v).sqrt(), count: v.len() }
            };
            (z, s)
        })
        .collect())
}

/// Population z-scores over the finite entries; NaN entries stay NaN.
fn zscores(x: &[f64], what: &str) -> Result<Vec<f64>> {
    let finite: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return Err(Error::Validation(format!("{what}: need at least two zones")));
    }
    let m = mean(&finite);
    let sd = pop_variance(&finite).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Numerical(format!("degenerate target: {what} has zero variance")));
    }
    Ok(x.iter().map(|v| if v.is_finite() { (v - m) / sd } else { f64::NAN }).collect())
}

/// |z(LST) − z(UTCI)| per zone. Only zones with both values take part in
/// the standardisation; the rest get NaN.
pub fn standardized_mismatch(lst: &[f64], utci: &[f64]) -> Result<Vec<f64>> {
    if lst.len() != utci.len() {
        return Err(Error::Structure("lst and utci columns differ in length".into()));
    }
    let both: Vec<bool> = lst.iter().zip(utci).map(|(a, b)| a.is_finite() && b.is_finite()).collect();
    let pick = |x: &[f64]| -> Vec<f64> { x.iter().zip(&both).map(|(v, ok)| if *ok { *v } else { f64::NAN }).collect() };
    let zl = zscores(&pick(lst), "lst")?;
    let zu = zscores(&pick(utci), "utci")?;
    Ok(zl.iter().zip(&zu).map(|(a, b)| (a - b).abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BivariateClass {
    /// 1 (low) ..= 3 (high).
    pub lst: u8,
    pub utci: u8,
}

impl BivariateClass {
    /// Compact code such as `"3-1"` (LST bin, UTCI bin).
    pub fn code(&self) -> String {
        format!("{}-{}", self.lst, self.utci)
    }

    pub fn label(&self) -> &'static str {
        match (self.lst, self.utci) {
            (1, 1) => "low LST and low UTCI: cool and comfortable",
            (3, 3) => "high LST and high UTCI: severe, compounding thermal risk",
            (3, 1) => "high LST but low UTCI: hot surfaces, mitigated heat stress",
            (1, 3) => "low LST but high UTCI: cool surfaces, severe pedestrian heat stress",
            _ => "intermediate",
        }
    }
}

/// Tercile bin: 1 up to and including the first tercile cut, 2 up to the
/// second, 3 above. Cuts use the type-7 quantile rule.
fn tercile_bins(x: &[f64], what: &str) -> Result<Vec<u8>> {
    let mut sorted: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    sort_f64(&mut sorted);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Validation(format!("{what}: need at least 3 distinct values for terciles")));
    }
    let q1 = quantile_sorted(&sorted, 1.0 / 3.0);
    let q2 = quantile_sorted(&sorted, 2.0 / 3.0);
    Ok(x.iter()
        .map(|&v| {
            if !v.is_finite() {
                0
            } else if v <= q1 {
                1
            } else if v <= q2 {
                2
            } else {
                3
            }
        })
        .collect())
}

/// 3×3 tercile class per zone; zones missing either value get `None`.
pub fn bivariate_class(lst: &[f64], utci: &[f64]) -> Result<Vec<Option<BivariateClass>>> {
    if lst.len() != utci.len() {
        return Err(Error::Structure("lst and utci columns differ in length".into()));
    }
    let a = tercile_bins(lst, "lst")?;
    let b = tercile_bins(utci, "utci")?;
    Ok(a.iter()
        .zip(&b)
        .map(|(&l, &u)| if l == 0 || u == 0 { None } else { Some(BivariateClass { lst: l, utci: u }) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSummary {
    pub lo: f64,
    pub hi: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub count: usize,
}

/// Median and quartiles of `y` within equal-width bins of `x`. The top edge
/// of the last bin is closed. Empty bins report NaN with count 0.
pub fn binned_median_iqr(x: &[f64], y: &[f64], n_bins: usize) -> Result<Vec<BinSummary>> {
    if x.len() != y.len() {
        return Err(Error::Structure("x and y differ in length".into()));
    }
    if n_bins == 0 {
        return Err(Error::Validation("n_bins must be >= 1".into()));
    }
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Validation("binned_median_iqr: empty input".into()));
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (a, b) in &pairs {
        let k = if width > 0.0 { (((a - lo) / width).floor() as usize).min(n_bins - 1) } else { 0 };
        bins[k].push(*b);
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(k, mut v)| {
            sort_f64(&mut v);
            let edge_lo = lo + width * k as f64;
            let edge_hi = if k + 1 == n_bins { hi } else { lo + width * (k + 1) as f64 };
            if v.is_empty() {
                BinSummary { lo: edge_lo, hi: edge_hi, median: f64::NAN, q25: f64::NAN, q75: f64::NAN, count: 0 }
            } else {
                BinSummary {
                    lo: edge_lo,
                    hi: edge_hi,
                    median: quantile_sorted(&v, 0.5),
                    q25: quantile_sorted(&v, 0.25),
                    q75: quantile_sorted(&v, 0.75),
                    count: v.len(),
                }
            }
        })
        .collect())
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn bisquare(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        t * t
    }
}

/// Robust locally weighted linear regression. Each point is fitted from
/// its ceil(frac·n) nearest neighbours in x with tricube weights; each of
/// the `iterations` robustness passes reweights by the bisquare of
/// residuals over six median absolute residuals. Returns ŷ in input order.
pub fn lowess(x: &[f64], y: &[f64], frac: f64, iterations: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Structure("x and y differ in length".into()));
    }
    if n < 3 {
        return Err(Error::Validation("lowess needs at least 3 points".into()));
    }
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Validation("frac must lie in (0, 1]".into()));
    }
    let r = (frac * n as f64).ceil() as usize;
    if r < 2 {
        return Err(Error::Validation(format!("frac {frac} leaves fewer than 2 points per window")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut robust = vec![1.0; n];
    let mut fit = vec![0.0; n];
    for pass in 0..=iterations {
        let mut lo = 0usize;
        for i in 0..n {
            // Slide the r-point window [lo, lo + r) to be nearest to xs[i].
            while lo + r < n && xs[i] - xs[lo] > xs[lo + r] - xs[i] {
                lo += 1;
            }
            let hi = lo + r;
            let h = (xs[i] - xs[lo]).max(xs[hi - 1] - xs[i]);
            let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for j in lo..hi {
                let d = (xs[j] - xs[i]).abs();
                let w = if h > 0.0 { tricube(d / h) } else { 1.0 } * robust[j];
                sw += w;
                swx += w * xs[j];
                swy += w * ys[j];
                swxx += w * xs[j] * xs[j];
                swxy += w * xs[j] * ys[j];
            }
            fit[i] = if sw <= 0.0 {
                ys[i]
            } else {
                let mx = swx / sw;
                let my = swy / sw;
                let vxx = swxx / sw - mx * mx;
                let scale = (xs[hi - 1] - xs[lo]).max(f64::MIN_POSITIVE);
                if vxx > 1e-12 * scale * scale {
                    let b = (swxy / sw - mx * my) / vxx;
                    my + b * (xs[i] - mx)
                } else {
                    my
                }
            };
        }
        if pass == iterations {
            break;
        }
        let mut abs_res: Vec<f64> = ys.iter().zip(&fit).map(|(a, b)| (a - b).abs()).collect();
        let res: Vec<f64> = ys.iter().zip(&fit).map(|(a, b)| a - b).collect();
        sort_f64(&mut abs_res);
        let s = quantile_sorted(&abs_res, 0.5);
        let yscale = ys.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        if s <= 1e-12 * yscale {
            break;
        }
        for j in 0..n {
            robust[j] = bisquare(res[j] / (6.0 * s));
        }
    }
    let mut out = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        out[i] = fit[k];
    }
    Ok(out)
}
