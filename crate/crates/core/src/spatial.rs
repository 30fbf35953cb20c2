//! Contiguity weights, global Moran's I and local indicators of spatial
//! association with permutation inference.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Zone, ZoneSet};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Queen,
    Rook,
    QueenNnHybrid,
}

impl FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "queen" => Ok(WeightScheme::Queen),
            "rook" => Ok(WeightScheme::Rook),
            "queen_nn_hybrid" => Ok(WeightScheme::QueenNnHybrid),
            _ => Err(Error::Validation(format!(
                "unknown weights scheme '{s}' (expected queen, rook or queen_nn_hybrid)"
            ))),
        }
    }
}

/// Sparse spatial weights. Neighbour lists are sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    pub n: usize,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub row_standardized: bool,
    pub s0: f64,
}

impl SpatialWeights {
    /// Binary weights from neighbour index lists, optionally row-standardised.
    pub fn from_neighbors(lists: Vec<Vec<usize>>, row_standardize: bool) -> Result<Self> {
        let n = lists.len();
        let mut neighbors = Vec::with_capacity(n);
        for (i, mut l) in lists.into_iter().enumerate() {
            l.sort_unstable();
            l.dedup();
            if l.iter().any(|&j| j == i || j >= n) {
                return Err(Error::Validation(format!("invalid neighbour list for row {i}")));
            }
            let w = if row_standardize && !l.is_empty() { 1.0 / l.len() as f64 } else { 1.0 };
            neighbors.push(l.into_iter().map(|j| (j, w)).collect::<Vec<_>>());
        }
        let s0 = neighbors.iter().flatten().map(|(_, w)| w).sum();
        Ok(SpatialWeights { n, neighbors, row_standardized: row_standardize, s0 })
    }

    /// Spatial lag Σ_j w_ij x_j.
    pub fn lag(&self, x: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    pub fn is_symmetric_structure(&self) -> bool {
        (0..self.n).all(|i| {
            self.neighbors[i]
                .iter()
                .all(|&(j, _)| self.neighbors[j].iter().any(|&(k, _)| k == i))
        })
    }
}

fn segments(z: &Zone) -> Vec<([f64; 2], [f64; 2])> {
    z.rings()
        .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a != b)
        .collect()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2], eps: f64) -> bool {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross(a, b, p).abs() > eps * len.max(1.0) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - eps
        && p[0] <= a[0].max(b[0]) + eps
        && p[1] >= a[1].min(b[1]) - eps
        && p[1] <= a[1].max(b[1]) + eps
}

/// Segments touch or cross (within `eps`).
fn segments_touch(s: ([f64; 2], [f64; 2]), t: ([f64; 2], [f64; 2]), eps: f64) -> bool {
    let (a, b) = s;
    let (c, d) = t;
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)) {
        return true;
    }
    on_segment(a, c, d, eps) || on_segment(b, c, d, eps) || on_segment(c, a, b, eps) || on_segment(d, a, b, eps)
}

/// Collinear segments overlapping over a positive length.
fn segments_share_edge(s: ([f64; 2], [f64; 2]), t: ([f64; 2], [f64; 2]), eps: f64) -> bool {
    let (a, b) = s;
    let (c, d) = t;
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross(a, b, c).abs() > eps * len.max(1.0) || cross(a, b, d).abs() > eps * len.max(1.0) {
        return false;
    }
    let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let proj = |p: [f64; 2]| (p[0] - a[0]) * dir[0] + (p[1] - a[1]) * dir[1];
    let (t0, t1) = (proj(c), proj(d));
    let lo = t0.min(t1).max(0.0);
    let hi = t0.max(t1).min(len);
    hi - lo > eps
}

fn boxes_touch(a: &[f64; 4], b: &[f64; 4], eps: f64) -> bool {
    a[0] <= b[2] + eps && b[0] <= a[2] + eps && a[1] <= b[3] + eps && b[1] <= a[3] + eps
}

/// Contiguity weights between zones (row order = ZoneSet order). Queen
/// neighbours touch at any point; rook neighbours share a boundary
/// segment of positive length. The hybrid scheme starts from queen and
/// links every zone left without neighbours to its nearest zone by
/// centroid distance, in both directions.
pub fn build_weights(zones: &ZoneSet, scheme: WeightScheme, row_standardize: bool) -> Result<SpatialWeights> {
    zones.validate()?;
    let n = zones.len();
    if n < 2 {
        return Err(Error::Validation("spatial weights need at least 2 zones".into()));
    }
    let boxes: Vec<[f64; 4]> = zones.zones.iter().map(|z| z.bbox()).collect();
    let extent = boxes
        .iter()
        .map(|b| (b[2] - b[0]).max(b[3] - b[1]))
        .fold(0.0, f64::max)
        .max(1.0);
    let eps = 1e-9 * extent;
    let segs: Vec<Vec<([f64; 2], [f64; 2])>> = zones.zones.iter().map(segments).collect();
    let rook = scheme == WeightScheme::Rook;
    let pairs: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i
                        && boxes_touch(&boxes[i], &boxes[j], eps)
                        && segs[i].iter().any(|&s| {
                            segs[j].iter().any(|&t| {
                                if rook {
                                    segments_share_edge(s, t, eps)
                                } else {
                                    segments_touch(s, t, eps)
                                }
                            })
                        })
                })
                .collect()
        })
        .collect();
    let mut lists = pairs;
    if scheme == WeightScheme::QueenNnHybrid {
        let cents = zones.centroids();
        let isolated: Vec<usize> = (0..n).filter(|&i| lists[i].is_empty()).collect();
        for i in isolated {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = (cents[i].0 - cents[j].0).hypot(cents[i].1 - cents[j].1);
                if d < best.0 {
                    best = (d, j);
                }
            }
            let j = best.1;
            if !lists[i].contains(&j) {
                lists[i].push(j);
            }
            if !lists[j].contains(&i) {
                lists[j].push(i);
            }
        }
    } else if lists.iter().all(|l| l.is_empty()) {
        return Err(Error::Validation(
            "disconnected weights: no zone touches another (use queen_nn_hybrid)".into(),
        ));
    }
    SpatialWeights::from_neighbors(lists, row_standardize)
}

fn centered(x: &[f64], n_min: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    if n < n_min {
        return Err(Error::Validation(format!("need at least {n_min} values, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("values must be finite".into()));
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = x.iter().map(|v| v - m).collect();
    let ss: f64 = z.iter().map(|v| v * v).sum();
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !(ss > (1e-14 * scale).powi(2) * n as f64) {
        return Err(Error::Numerical("values have zero variance".into()));
    }
    Ok((z, ss))
}

fn moran_stat(z: &[f64], ss: f64, w: &SpatialWeights) -> f64 {
    let mut num = 0.0;
    for (i, row) in w.neighbors.iter().enumerate() {
        let mut s = 0.0;
        for &(j, wij) in row {
            s += wij * z[j];
        }
        num += z[i] * s;
    }
    (w.n as f64 / w.s0) * num / ss
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoranResult {
    pub i: f64,
    pub expected: f64,
    /// Two-sided permutation p-value; NaN when no permutations were drawn.
    pub p_value: f64,
}

const GLOBAL_STREAM: u64 = 0x4d4f_5241_4e47;
const LOCAL_STREAM: u64 = 0x4c49_5341;

/// Global Moran's I with a permutation test. Each permutation draws from
/// its own seeded substream, so the result does not depend on threads.
pub fn global_moran(x: &[f64], w: &SpatialWeights, permutations: usize, seed: u64) -> Result<MoranResult> {
    if x.len() != w.n {
        return Err(Error::Structure(format!("{} values for {} weight rows", x.len(), w.n)));
    }
    let (z, ss) = centered(x, 3)?;
    if !(w.s0 > 0.0) {
        return Err(Error::Validation("weights have no links".into()));
    }
    let obs = moran_stat(&z, ss, w);
    let base = rng::derive_seed(seed, GLOBAL_STREAM);
    let hits: usize = (0..permutations)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::stream(base, p as u64);
            let mut zp = z.clone();
            zp.shuffle(&mut r);
            usize::from(moran_stat(&zp, ss, w).abs() >= obs.abs())
        })
        .sum();
    let p_value = if permutations == 0 {
        f64::NAN
    } else {
        (hits + 1) as f64 / (permutations + 1) as f64
    };
    Ok(MoranResult { i: obs, expected: -1.0 / (w.n as f64 - 1.0), p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LisaCategory {
    HighHigh,
    LowLow,
    HighLow,
    LowHigh,
    NotSignificant,
}

impl LisaCategory {
    pub fn code(self) -> &'static str {
        match self {
            LisaCategory::HighHigh => "HH",
            LisaCategory::LowLow => "LL",
            LisaCategory::HighLow => "HL",
            LisaCategory::LowHigh => "LH",
            LisaCategory::NotSignificant => "not_significant",
        }
    }
}

impl fmt::Display for LisaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisaValue {
    pub local_i: f64,
    /// Folded one-sided conditional-permutation p-value.
    pub p_value: f64,
    pub z: f64,
    pub lag: f64,
    pub category: LisaCategory,
}

/// Local Moran's I_i = (z_i / m2) Σ_j w_ij z_j with m2 = Σ z² / n, tested
/// by conditional permutation: z_i is held fixed and its neighbour values
/// are redrawn without replacement from the other n − 1 zones. The p-value
/// is (min(k, P − k) + 1)/(P + 1) where k counts permutations with
/// I_i ≥ the observed value. Zones with p ≤ alpha are labelled by the signs
/// of z_i and its spatial lag.
pub fn lisa(x: &[f64], w: &SpatialWeights, permutations: usize, seed: u64, alpha: f64) -> Result<Vec<LisaValue>> {
    if x.len() != w.n {
        return Err(Error::Structure(format!("{} values for {} weight rows", x.len(), w.n)));
    }
    let (z, ss) = centered(x, 3)?;
    let n = z.len();
    let m2 = ss / n as f64;
    let lag = w.lag(&z);
    let base = rng::derive_seed(seed, LOCAL_STREAM);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let row = &w.neighbors[i];
            let obs = z[i] / m2 * lag[i];
            if row.is_empty() || permutations == 0 {
                return LisaValue { local_i: obs, p_value: 1.0, z: z[i], lag: lag[i], category: LisaCategory::NotSignificant };
            }
            let mut r = rng::stream(base, i as u64);
            let k = row.len();
            let mut larger = 0usize;
            for _ in 0..permutations {
                let picks = rand::seq::index::sample(&mut r, n - 1, k);
                let mut s = 0.0;
                for (slot, idx) in picks.iter().enumerate() {
                    let j = if idx >= i { idx + 1 } else { idx };
                    s += row[slot].1 * z[j];
                }
                if z[i] / m2 * s >= obs {
                    larger += 1;
                }
            }
            let folded = larger.min(permutations - larger);
            let p = (folded + 1) as f64 / (permutations + 1) as f64;
            let category = if p > alpha {
                LisaCategory::NotSignificant
            } else if z[i] > 0.0 && lag[i] > 0.0 {
                LisaCategory::HighHigh
            } else if z[i] < 0.0 && lag[i] < 0.0 {
                LisaCategory::LowLow
            } else if z[i] > 0.0 && lag[i] < 0.0 {
                LisaCategory::HighLow
            } else if z[i] < 0.0 && lag[i] > 0.0 {
                LisaCategory::LowHigh
            } else {
                LisaCategory::NotSignificant
            };
            LisaValue { local_i: obs, p_value: p, z: z[i], lag: lag[i], category }
        })
        .collect())
}
