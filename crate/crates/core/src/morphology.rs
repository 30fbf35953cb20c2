//! Sky view factor by horizon ray casting, and per-zone building/canopy
//! morphometrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microclimate::filled_surface;
use crate::raster::{bilinear_raw, Grid};

/// Eye level of the observer above the surface, metres.
pub const OBSERVER_HEIGHT: f64 = 1.1;
/// Number of zenith annuli in the hemisphere discretisation.
const ANNULI: usize = 90;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvfConfig {
    pub directions: usize,
    pub search_radius: f64,
    pub canopy_transmissivity: f64,
}

impl Default for SvfConfig {
    fn default() -> Self {
        SvfConfig {
            directions: 360,
            search_radius: 150.0,
            canopy_transmissivity: 0.03,
        }
    }
}

impl SvfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.directions < 8 {
            return Err(Error::Config(format!("directions must be >= 8, got {}", self.directions)));
        }
        if !(self.search_radius > 0.0) {
            return Err(Error::Config("search_radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.canopy_transmissivity) {
            return Err(Error::Config("canopy_transmissivity must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Cumulative annulus weights: `table[m]` is the sky fraction of the `m`
/// annuli nearest the zenith. Annulus `i` (1-based) spans zenith angles
/// ((i-1)°, i°] and carries weight sin(π/2n)·sin(π(2i−1)/2n), so a full
/// hemisphere sums to one.
fn annulus_table() -> [f64; ANNULI + 1] {
    let n = ANNULI as f64;
    let mut t = [0.0; ANNULI + 1];
    let a = (std::f64::consts::PI / (2.0 * n)).sin();
    for i in 1..=ANNULI {
        let w = a * (std::f64::consts::PI * (2.0 * i as f64 - 1.0) / (2.0 * n)).sin();
        t[i] = t[i - 1] + w;
    }
    t
}

/// Sky weight of one azimuth sector whose horizon sits at `alpha` degrees:
/// annuli whose mid-altitude lies strictly above the horizon are visible.
#[inline]
fn sector_weight(table: &[f64; ANNULI + 1], alpha_deg: f64) -> f64 {
    // Annulus i has mid altitude 90.5 − i; visible iff i < 90.5 − alpha.
    let limit = 90.5 - alpha_deg;
    let m = if limit <= 1.0 { 0 } else { ((limit.ceil() as usize) - 1).min(ANNULI) };
    table[m]
}

/// Sky view factor for every cell.
///
/// Per azimuth sector the horizon is the steepest elevation angle toward
/// the surface sampled bilinearly at one-cell steps out to the search
/// radius (or the grid edge). Building-only and building-plus-canopy
/// horizons are found separately and blended through the canopy
/// transmissivity. Cells that are nodata in `dsm` stay nodata.
pub fn compute_svf(dsm: &Grid, cdsm: Option<&Grid>, cfg: &SvfConfig) -> Result<Grid> {
    cfg.validate()?;
    if let Some(c) = cdsm {
        dsm.ensure_aligned(c, "cdsm vs dsm")?;
    }
    let surface = filled_surface(dsm)?;
    let (w, h) = (dsm.width(), dsm.height());
    let veg_top: Option<Vec<f64>> = cdsm.map(|c| {
        surface
            .iter()
            .zip(c.values())
            .map(|(s, &v)| if c.is_nodata(v) || v <= 0.0 { *s } else { s + v })
            .collect()
    });
    let table = annulus_table();
    let cs = dsm.cell_size();
    let max_steps = (cfg.search_radius / cs).floor() as usize;
    let dirs: Vec<(f64, f64)> = (0..cfg.directions)
        .map(|k| {
            let az = (k as f64 * 360.0 / cfg.directions as f64).to_radians();
            (-az.cos(), az.sin())
        })
        .collect();
    let top_b = surface.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let top_v = veg_top
        .as_ref()
        .map(|v| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(top_b);
    let tau = cfg.canopy_transmissivity;
    let nodata = dsm.nodata();

    let horizon = |field: &[f64], top: f64, r: usize, c: usize, dr: f64, dc: f64, z0: f64| -> f64 {
        let mut best = 0.0f64;
        for s in 1..=max_steps {
            let dist = s as f64 * cs;
            if (top - z0) / dist <= best {
                break;
            }
            let pr = r as f64 + dr * s as f64;
            let pc = c as f64 + dc * s as f64;
            if pr < 0.0 || pc < 0.0 || pr > (h - 1) as f64 || pc > (w - 1) as f64 {
                break;
            }
            let t = (bilinear_raw(field, w, h, pr, pc) - z0) / dist;
            if t > best {
                best = t;
            }
        }
        best.atan().to_degrees()
    };

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        for (c, o) in row.iter_mut().enumerate() {
            if dsm.value(r, c).is_none() {
                *o = nodata;
                continue;
            }
            let z0 = surface[r * w + c] + OBSERVER_HEIGHT;
            let mut svf_b = 0.0;
            let mut svf_bv = 0.0;
            for &(dr, dc) in &dirs {
                let ab = horizon(&surface, top_b, r, c, dr, dc, z0);
                svf_b += sector_weight(&table, ab);
                if let Some(v) = &veg_top {
                    let av = horizon(v, top_v, r, c, dr, dc, z0);
                    svf_bv += sector_weight(&table, ab.max(av));
                }
            }
            let n = dirs.len() as f64;
            svf_b /= n;
            *o = if veg_top.is_some() {
                svf_bv /= n;
                (svf_b - (1.0 - tau) * (svf_b - svf_bv)).clamp(0.0, 1.0)
            } else {
                svf_b.clamp(0.0, 1.0)
            };
        }
    });
    dsm.with_values(out)
}

/// Column names produced by [`zone_morphometrics`].
pub const MORPHOMETRIC_COLUMNS: [&str; 7] = ["BH", "BH_sd", "BD", "FAR", "CH", "CH_sd", "CD"];

/// Per-zone building and canopy descriptors, keyed by zone id. Land cells
/// are zone cells where `bh` is valid. Heights above zero count as
/// building/canopy. Means and sample standard deviations use only those
/// cells (NaN when there are none, or fewer than two for the sd); BD and CD
/// are fractions of land cells; FAR sums cell area × floor count over the
/// zone's land area, with floor count max(1, round(height / floor_height)).
/// A zone without land cells gets NaN in every column.
pub fn zone_morphometrics(
    bh: &Grid,
    ch: &Grid,
    zone_raster: &Grid,
    floor_height: f64,
) -> Result<BTreeMap<i64, [f64; 7]>> {
    bh.ensure_aligned(ch, "ch vs bh")?;
    bh.ensure_aligned(zone_raster, "zones vs bh")?;
    if !(floor_height > 0.0) {
        return Err(Error::Validation("floor_height must be positive".into()));
    }
    #[derive(Default)]
    struct Acc {
        zone_cells: usize,
        land: usize,
        bh: Vec<f64>,
        ch: Vec<f64>,
        floors: f64,
    }
    let mut acc: BTreeMap<i64, Acc> = BTreeMap::new();
    for i in 0..bh.len() {
        let zv = zone_raster.values()[i];
        if zone_raster.is_nodata(zv) {
            continue;
        }
        let a = acc.entry(zv as i64).or_default();
        a.zone_cells += 1;
        let b = bh.values()[i];
        if bh.is_nodata(b) {
            continue;
        }
        a.land += 1;
        if b > 0.0 {
            a.bh.push(b);
            a.floors += ((b / floor_height).round()).max(1.0);
        }
        let cv = ch.values()[i];
        if !ch.is_nodata(cv) && cv > 0.0 {
            a.ch.push(cv);
        }
    }
    let mut out = BTreeMap::new();
    for (id, a) in acc {
        let row = if a.land == 0 {
            [f64::NAN; 7]
        } else {
            let land = a.land as f64;
            let (bh_mean, bh_sd) = mean_sd(&a.bh);
            let (ch_mean, ch_sd) = mean_sd(&a.ch);
            [
                bh_mean,
                bh_sd,
                a.bh.len() as f64 / land,
                a.floors / land,
                ch_mean,
                ch_sd,
                a.ch.len() as f64 / land,
            ]
        };
        out.insert(id, row);
    }
    Ok(out)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = crate::stats::mean(xs);
    let sd = if xs.len() < 2 { f64::NAN } else { crate::stats::sample_sd(xs) };
    (m, sd)
}
