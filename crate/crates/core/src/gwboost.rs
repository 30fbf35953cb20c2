//! Geographically weighted boosting: one boosted model per location, trained
//! on its spatial neighbourhood with bi-square kernel weights passed as
//! sample weights.

use rayon::prelude::*;

use crate::boost::{fit, BoostedModel, FitConfig, OobRecord};
use crate::error::{Error, Result};
use crate::gwr::{bisquare_unchecked, sorted_neighbors};
use crate::rng;
use crate::spatial::{global_moran, MoranResult, SpatialWeights};
use crate::stats::{sample_sd, weighted_r2, Metrics};

/// Neighbourhood definition for local models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalKernel {
    /// k nearest zones including the location itself, bi-square weights
    /// with the bandwidth at the k-th neighbour.
    Adaptive(usize),
    /// Every zone with weight 1 and the global seed; each local model then
    /// reproduces the global fit (diagnostic mode).
    Uniform,
}

#[derive(Debug, Clone)]
pub struct LocalModel {
    pub zone_id: i64,
    pub model: BoostedModel,
    /// (row, weight) pairs of the local training set, ordered by row.
    pub weights: Vec<(usize, f64)>,
    pub prediction: f64,
    pub local_r2: f64,
    /// Out-of-bag record with rows mapped back to global indices.
    pub oob: Option<OobRecord>,
}

#[derive(Debug, Clone)]
pub struct LocalModelSet {
    pub kernel: LocalKernel,
    pub config: FitConfig,
    pub models: Vec<LocalModel>,
    pub residuals: Vec<f64>,
    /// Residual over the sample sd of all residuals.
    pub std_residuals: Vec<f64>,
}

fn check(x: &[Vec<f64>], y: &[f64], coords: &[(f64, f64)], zone_ids: &[i64]) -> Result<()> {
    let n = x.len();
    if y.len() != n || coords.len() != n || zone_ids.len() != n {
        return Err(Error::Structure("x, y, coords and zone ids must have equal length".into()));
    }
    if n < 2 {
        return Err(Error::Validation("need at least 2 locations".into()));
    }
    Ok(())
}

/// Training rows and bi-square weights for location `i` over the first `k`
/// entries of `neighbors` (sorted by distance).
fn adaptive_rows(neighbors: &[(usize, f64)], k: usize) -> Vec<(usize, f64)> {
    let b = neighbors[k - 1].1;
    let mut rows: Vec<(usize, f64)> = neighbors[..k]
        .iter()
        .map(|&(j, d)| (j, if b > 0.0 { bisquare_unchecked(d, b) } else { 0.0 }))
        .collect();
    rows.sort_by_key(|r| r.0);
    rows
}

fn fit_rows(
    x: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    rows: &[(usize, f64)],
    cfg: &FitConfig,
) -> Result<(BoostedModel, Option<OobRecord>)> {
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| x[r.0].clone()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| y[r.0]).collect();
    let ws: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let out = fit(&xs, &ys, &ws, names, cfg)?;
    let oob = out.oob.map(|mut o| {
        o.final_rows = o.final_rows.iter().map(|&l| rows[l].0).collect();
        o
    });
    Ok((out.model, oob))
}

/// Fits one local model per location. Per-location subsampling seeds are
/// derived from the zone id, so results do not depend on scheduling.
pub fn gw_fit(
    x: &[Vec<f64>],
    y: &[f64],
    coords: &[(f64, f64)],
    zone_ids: &[i64],
    names: &[String],
    kernel: LocalKernel,
    cfg: &FitConfig,
) -> Result<LocalModelSet> {
    check(x, y, coords, zone_ids)?;
    cfg.validate()?;
    let n = x.len();
    if let LocalKernel::Adaptive(k) = kernel {
        if k < 10 || k > n {
            return Err(Error::Validation(format!("adaptive k must lie in [10, {n}], got {k}")));
        }
    }
    let models: Vec<LocalModel> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zid = zone_ids[i];
            let (rows, local_cfg) = match kernel {
                LocalKernel::Uniform => ((0..n).map(|j| (j, 1.0)).collect::<Vec<_>>(), *cfg),
                LocalKernel::Adaptive(k) => {
                    let rows = adaptive_rows(&sorted_neighbors(coords, i), k);
                    (rows, FitConfig { seed: rng::derive_seed(cfg.seed, zid as u64), ..*cfg })
                }
            };
            if !(rows.iter().map(|r| r.1).sum::<f64>() > 0.0) {
                return Err(Error::Model(format!("zone {zid}: all kernel weights are zero")));
            }
            let (model, oob) =
                fit_rows(x, y, names, &rows, &local_cfg).map_err(|e| Error::Model(format!("zone {zid}: {e}")))?;
            let prediction = model.predict_row(&x[i]);
            let ys: Vec<f64> = rows.iter().map(|r| y[r.0]).collect();
            let ps: Vec<f64> = rows.iter().map(|r| model.predict_row(&x[r.0])).collect();
            let ws: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let local_r2 = weighted_r2(&ys, &ps, &ws);
            Ok(LocalModel { zone_id: zid, model, weights: rows, prediction, local_r2, oob })
        })
        .collect::<Result<_>>()?;
    let residuals: Vec<f64> = models.iter().zip(y).map(|(m, yi)| yi - m.prediction).collect();
    let sd = sample_sd(&residuals);
    let std_residuals = residuals.iter().map(|r| if sd > 0.0 { r / sd } else { 0.0 }).collect();
    Ok(LocalModelSet { kernel, config: *cfg, models, residuals, std_residuals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSelection {
    pub best_k: usize,
    /// (k, leave-one-out RMSE); `None` for candidates skipped as k ≥ n.
    pub trace: Vec<(usize, Option<f64>)>,
}

/// Leave-one-out spatial CV over candidate neighbourhood sizes: each
/// location is predicted by a model fitted on its k nearest other
/// locations. Lowest RMSE wins, ties toward the smaller k.
pub fn loo_bandwidth(
    x: &[Vec<f64>],
    y: &[f64],
    coords: &[(f64, f64)],
    zone_ids: &[i64],
    names: &[String],
    candidates: &[usize],
    cfg: &FitConfig,
) -> Result<BandwidthSelection> {
    check(x, y, coords, zone_ids)?;
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::Validation("no bandwidth candidates".into()));
    }
    let n = x.len();
    let others: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| sorted_neighbors(coords, i).into_iter().filter(|&(j, _)| j != i).collect())
        .collect();
    let mut trace = Vec::with_capacity(candidates.len());
    for &k in candidates {
        if k >= n || k < 2 {
            trace.push((k, None));
            continue;
        }
        let preds: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let rows = adaptive_rows(&others[i], k);
                let zid = zone_ids[i];
                if !(rows.iter().map(|r| r.1).sum::<f64>() > 0.0) {
                    return Err(Error::Model(format!("zone {zid}: all kernel weights are zero at k = {k}")));
                }
                let c = FitConfig { seed: rng::derive_seed(cfg.seed, zid as u64), ..*cfg };
                let (model, _) = fit_rows(x, y, names, &rows, &c).map_err(|e| Error::Model(format!("zone {zid}: {e}")))?;
                Ok(model.predict_row(&x[i]))
            })
            .collect::<Result<_>>()?;
        trace.push((k, Some(Metrics::compute(y, &preds).rmse)));
    }
    let mut best: Option<(usize, f64)> = None;
    for &(k, r) in &trace {
        if let Some(r) = r {
            if best.is_none_or(|(bk, br)| r < br || (r == br && k < bk)) {
                best = Some((k, r));
            }
        }
    }
    let Some((best_k, _)) = best else {
        return Err(Error::Validation(format!("every bandwidth candidate is >= n = {n}")));
    };
    Ok(BandwidthSelection { best_k, trace })
}

/// Metrics pooled over every local model's final out-of-bag predictions.
pub fn global_oob(set: &LocalModelSet, y: &[f64]) -> Result<Metrics> {
    let (mut obs, mut pred) = (Vec::new(), Vec::new());
    for m in &set.models {
        let Some(o) = &m.oob else {
            return Err(Error::Validation(format!("no OOB instances (zone {} trained with subsample = 1)", m.zone_id)));
        };
        for (&r, &p) in o.final_rows.iter().zip(&o.final_predictions) {
            obs.push(y[r]);
            pred.push(p);
        }
    }
    if obs.is_empty() {
        return Err(Error::Validation("no OOB instances".into()));
    }
    Ok(Metrics::compute(&obs, &pred))
}

/// Global Moran's I of the standardised local residuals.
pub fn residual_moran(set: &LocalModelSet, w: &SpatialWeights, permutations: usize, seed: u64) -> Result<MoranResult> {
    global_moran(&set.std_residuals, w, permutations, seed)
}
