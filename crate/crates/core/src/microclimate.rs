//! Sun position, shadow casting, six-directional radiation and mean radiant
//! temperature for a standing person.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{bilinear_raw, Grid};
use crate::utci;

pub const STEFAN_BOLTZMANN: f64 = 5.67e-8;
const KELVIN: f64 = 273.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteoSample {
    pub timestamp: DateTime<Utc>,
    /// Air temperature, °C.
    pub ta: f64,
    /// Relative humidity, %.
    pub rh: f64,
    /// Wind speed at 10 m, m/s.
    pub wind10: f64,
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
}

impl MeteoSample {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.ta, self.rh, self.wind10, self.ghi, self.dni, self.dhi]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation(format!("non-finite meteo value at {}", self.timestamp)));
        }
        if !(0.0..=100.0).contains(&self.rh) {
            return Err(Error::Validation(format!("rh {} outside [0, 100] at {}", self.rh, self.timestamp)));
        }
        if self.ghi < 0.0 || self.dni < 0.0 || self.dhi < 0.0 || self.wind10 < 0.0 {
            return Err(Error::Validation(format!(
                "negative irradiance or wind at {}",
                self.timestamp
            )));
        }
        Ok(())
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    None
}

/// Parses `timestamp,ta,rh,wind10,ghi,dni,dhi` (timestamps in UTC).
pub fn parse_meteo_csv(text: &str) -> Result<Vec<MeteoSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = ["timestamp", "ta", "rh", "wind10", "ghi", "dni", "dhi"];
    let mut idx = [0usize; 7];
    for (k, name) in cols.iter().enumerate() {
        idx[k] = headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("meteo header lacks column '{name}'"),
        })?;
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let ts = parse_timestamp(&rec[idx[0]]).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid timestamp '{}'", &rec[idx[0]]),
        })?;
        let mut v = [0.0; 6];
        for k in 0..6 {
            let s = &rec[idx[k + 1]];
            v[k] = s.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid {} value '{s}'", cols[k + 1]),
            })?;
        }
        let sample = MeteoSample {
            timestamp: ts,
            ta: v[0],
            rh: v[1],
            wind10: v[2],
            ghi: v[3],
            dni: v[4],
            dhi: v[5],
        };
        sample.validate()?;
        out.push(sample);
    }
    Ok(out)
}

pub fn read_meteo_csv(path: &Path) -> Result<Vec<MeteoSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_meteo_csv(&text)
}

pub fn format_meteo_csv(samples: &[MeteoSample]) -> String {
    let mut s = String::from("timestamp,ta,rh,wind10,ghi,dni,dhi\n");
    for m in samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.timestamp.format("%Y-%m-%dT%H:%M:%SZ"),
            m.ta,
            m.rh,
            m.wind10,
            m.ghi,
            m.dni,
            m.dhi
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// Sun position
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SunPosition {
    /// Degrees clockwise from north.
    pub azimuth: f64,
    /// Degrees above the horizon (geometric, no refraction).
    pub altitude: f64,
}

pub fn julian_day(t: &DateTime<Utc>) -> f64 {
    t.timestamp() as f64 / 86400.0 + t.timestamp_subsec_nanos() as f64 / 86.4e12 + 2_440_587.5
}

/// Low-precision solar coordinates of the Astronomical Almanac (accurate to
/// about 0.01° in declination between 1950 and 2050).
pub fn solar_position(lat: f64, lon: f64, t: &DateTime<Utc>) -> SunPosition {
    let n = julian_day(t) - 2_451_545.0;
    let l = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let g = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let lambda = (l + 1.915 * g.sin() + 0.020 * (2.0 * g).sin()).to_radians();
    let eps = (23.439 - 0.000_000_4 * n).to_radians();
    let ra = (eps.cos() * lambda.sin()).atan2(lambda.cos());
    let dec = (eps.sin() * lambda.sin()).asin();
    let gmst_h = (18.697_374_558 + 24.065_709_824_419_08 * n).rem_euclid(24.0);
    let lmst = (gmst_h * 15.0 + lon).to_radians();
    let ha = lmst - ra;
    let phi = lat.to_radians();
    let sin_alt = dec.sin() * phi.sin() + dec.cos() * phi.cos() * ha.cos();
    let altitude = sin_alt.clamp(-1.0, 1.0).asin().to_degrees();
    let az = (-dec.cos() * ha.sin()).atan2(dec.sin() * phi.cos() - dec.cos() * ha.cos() * phi.sin());
    SunPosition {
        azimuth: az.to_degrees().rem_euclid(360.0),
        altitude,
    }
}

// ---------------------------------------------------------------------------
// Shadows
// ---------------------------------------------------------------------------

/// Step between ray samples, in cells.
const SHADOW_STEP: f64 = 0.5;

/// Beam transmission toward the sun for every cell: 1 when the ray is
/// clear, 0 when a building intersects it, `tau` when only canopy does
/// (including canopy over the cell itself). Sun at or below the horizon
/// gives an all-zero grid.
pub fn cast_shadows(dsm: &Grid, cdsm: Option<&Grid>, sun: SunPosition, tau: f64) -> Result<Grid> {
    if let Some(c) = cdsm {
        dsm.ensure_aligned(c, "cdsm vs dsm")?;
    }
    let nodata = dsm.nodata();
    if sun.altitude <= 0.0 {
        return Ok(dsm.map_cells(|r, c| if dsm.value(r, c).is_some() { 0.0 } else { nodata }));
    }
    let surface = filled_surface(dsm)?;
    let canopy: Vec<f64> = match cdsm {
        Some(c) => c.values().iter().map(|&v| if c.is_nodata(v) { 0.0 } else { v.max(0.0) }).collect(),
        None => vec![0.0; dsm.len()],
    };
    let veg_top: Vec<f64> = surface.iter().zip(&canopy).map(|(s, c)| s + c).collect();
    let (w, h) = (dsm.width(), dsm.height());
    let top = veg_top.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let az = sun.azimuth.to_radians();
    let (dr, dc) = (-az.cos() * SHADOW_STEP, az.sin() * SHADOW_STEP);
    let rise = sun.altitude.to_radians().tan() * SHADOW_STEP * dsm.cell_size();
    let has_canopy = canopy.iter().any(|&v| v > 0.0);
    Ok(dsm.map_cells(|r, c| {
        if dsm.value(r, c).is_none() {
            return nodata;
        }
        let i = r * w + c;
        let z0 = surface[i];
        let mut veg_hit = canopy[i] > 0.0;
        let mut s = 1.0;
        loop {
            let z = z0 + rise * s;
            if z > top {
                break;
            }
            let pr = r as f64 + dr * s;
            let pc = c as f64 + dc * s;
            if pr < 0.0 || pc < 0.0 || pr > (h - 1) as f64 || pc > (w - 1) as f64 {
                break;
            }
            if bilinear_raw(&surface, w, h, pr, pc) > z {
                return 0.0;
            }
            if has_canopy && !veg_hit && bilinear_raw(&veg_top, w, h, pr, pc) > z {
                veg_hit = true;
            }
            s += 1.0;
        }
        if veg_hit {
            tau
        } else {
            1.0
        }
    }))
}

/// DSM values with nodata replaced by the lowest valid height, so that ray
/// marching can sample any position.
pub(crate) fn filled_surface(dsm: &Grid) -> Result<Vec<f64>> {
    let (lo, _) = dsm
        .min_max()
        .ok_or_else(|| Error::Validation("dsm has no valid cells".into()))?;
    Ok(dsm
        .values()
        .iter()
        .map(|&v| if dsm.is_nodata(v) { lo } else { v })
        .collect())
}

// ---------------------------------------------------------------------------
// Radiation and Tmrt
// ---------------------------------------------------------------------------

/// Flux directions in storage order. `Up` holds radiation arriving from
/// below (reflected/emitted by the ground), `Down` radiation from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    East,
    West,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
        Direction::Up,
        Direction::Down,
    ];
}

/// Angular view factors of a standing person, in [`Direction::ALL`] order.
pub const STANDING_VIEW_FACTORS: [f64; 6] = [0.22, 0.22, 0.22, 0.22, 0.06, 0.06];
const LATERAL_AZIMUTHS: [f64; 4] = [0.0, 180.0, 90.0, 270.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConstants {
    /// Shortwave absorption coefficient.
    pub zeta_k: f64,
    /// Body emissivity.
    pub eps_p: f64,
    pub sigma: f64,
}

impl Default for BodyConstants {
    fn default() -> Self {
        BodyConstants {
            zeta_k: 0.7,
            eps_p: 0.97,
            sigma: STEFAN_BOLTZMANN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadiationField {
    pub k: [Grid; 6],
    pub l: [Grid; 6],
    pub view_factors: [f64; 6],
}

/// Clear-sky emissivity from vapour pressure (hPa) and air temperature (K).
pub fn sky_emissivity(e_hpa: f64, ta_k: f64) -> f64 {
    1.24 * (e_hpa / ta_k).powf(1.0 / 7.0)
}

/// Point fluxes for one cell; see [`directional_fluxes`].
pub fn point_fluxes(svf: f64, shadow: f64, albedo: f64, meteo: &MeteoSample, sun: SunPosition) -> ([f64; 6], [f64; 6]) {
    let mut k = [0.0; 6];
    if sun.altitude > 0.0 {
        let alt = sun.altitude.to_radians();
        let beam = shadow * meteo.dni;
        let k_down = beam * alt.sin() + meteo.dhi * svf;
        for (d, phi) in LATERAL_AZIMUTHS.iter().enumerate() {
            let facing = (sun.azimuth - phi).to_radians().cos().max(0.0);
            k[d] = beam * alt.cos() * facing + 0.5 * meteo.dhi * (1.0 - svf);
        }
        k[5] = k_down;
        k[4] = albedo * k_down;
    }
    let ta_k = meteo.ta + KELVIN;
    let black = STEFAN_BOLTZMANN * ta_k.powi(4);
    let eps_sky = sky_emissivity(utci::vapor_pressure_hpa(meteo.ta, meteo.rh), ta_k);
    let l_up = black;
    let l_down = eps_sky * black * svf + black * (1.0 - svf);
    let l_lat = 0.5 * (l_up + l_down);
    let l = [l_lat, l_lat, l_lat, l_lat, l_up, l_down];
    (k, l)
}

/// Six-directional short- and longwave fluxes. Nodata in any input grid
/// gives nodata in every output grid.
pub fn directional_fluxes(
    svf: &Grid,
    shadow: &Grid,
    albedo: &Grid,
    meteo: &MeteoSample,
    sun: SunPosition,
) -> Result<RadiationField> {
    svf.ensure_aligned(shadow, "shadow vs svf")?;
    svf.ensure_aligned(albedo, "albedo vs svf")?;
    let nodata = svf.nodata();
    let cell = |r: usize, c: usize| -> Option<([f64; 6], [f64; 6])> {
        let s = svf.value(r, c)?;
        let sh = shadow.value(r, c)?;
        let a = albedo.value(r, c)?;
        Some(point_fluxes(s, sh, a, meteo, sun))
    };
    let make = |long: bool, d: usize| {
        svf.map_cells(|r, c| match cell(r, c) {
            Some((k, l)) => {
                if long {
                    l[d]
                } else {
                    k[d]
                }
            }
            None => nodata,
        })
    };
    Ok(RadiationField {
        k: std::array::from_fn(|d| make(false, d)),
        l: std::array::from_fn(|d| make(true, d)),
        view_factors: STANDING_VIEW_FACTORS,
    })
}

/// Mean radiant temperature (°C) from directional fluxes at one point.
/// A non-positive absorbed flux returns absolute zero.
pub fn tmrt_point(k: &[f64; 6], l: &[f64; 6], f: &[f64; 6], body: &BodyConstants) -> f64 {
    let mut sk = 0.0;
    let mut sl = 0.0;
    for i in 0..6 {
        sk += k[i] * f[i];
        sl += l[i] * f[i];
    }
    let r = body.zeta_k * sk + body.eps_p * sl;
    if r <= 0.0 {
        return -KELVIN;
    }
    (r / (body.eps_p * body.sigma)).powf(0.25) - KELVIN
}

pub fn mean_radiant_temperature(rad: &RadiationField, body: &BodyConstants) -> Result<Grid> {
    let sum: f64 = rad.view_factors.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("view factors sum to {sum}, expected 1")));
    }
    let base = &rad.k[0];
    for g in rad.k.iter().chain(rad.l.iter()) {
        base.ensure_aligned(g, "radiation components")?;
    }
    let nodata = base.nodata();
    Ok(base.map_cells(|r, c| {
        let mut k = [0.0; 6];
        let mut l = [0.0; 6];
        for d in 0..6 {
            match (rad.k[d].value(r, c), rad.l[d].value(r, c)) {
                (Some(a), Some(b)) => {
                    k[d] = a;
                    l[d] = b;
                }
                _ => return nodata,
            }
        }
        tmrt_point(&k, &l, &rad.view_factors, body)
    }))
}

/// Tmrt and UTCI grids for one meteorological sample.
#[derive(Debug, Clone)]
pub struct HourlyResult {
    pub sun: SunPosition,
    pub tmrt: Grid,
    pub utci: Grid,
    pub clamped_cells: usize,
}

/// Inputs that stay fixed across the hours of a run.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub dsm: &'a Grid,
    pub cdsm: Option<&'a Grid>,
    pub svf: &'a Grid,
    pub albedo: &'a Grid,
    pub lat: f64,
    pub lon: f64,
    pub tau: f64,
}

pub fn hourly_utci(scene: &Scene<'_>, meteo: &MeteoSample, body: &BodyConstants) -> Result<HourlyResult> {
    let sun = solar_position(scene.lat, scene.lon, &meteo.timestamp);
    let shadow = cast_shadows(scene.dsm, scene.cdsm, sun, scene.tau)?;
    let rad = directional_fluxes(scene.svf, &shadow, scene.albedo, meteo, sun)?;
    let tmrt = mean_radiant_temperature(&rad, body)?;
    let (utci, clamped_cells) = utci::utci_grid(&tmrt, meteo.ta, meteo.wind10, meteo.rh);
    Ok(HourlyResult {
        sun,
        tmrt,
        utci,
        clamped_cells,
    })
}

/// Samples whose local clock hour (UTC + `utc_offset_hours`) equals `hour`.
pub fn samples_at_local_hour(samples: &[MeteoSample], hour: u32, utc_offset_hours: i32) -> Vec<MeteoSample> {
    samples
        .iter()
        .filter(|m| {
            let local = m.timestamp + chrono::Duration::hours(utc_offset_hours as i64);
            local.hour() == hour
        })
        .copied()
        .collect()
}

/// Cellwise mean UTCI over the given samples, accumulated in sample order.
/// Returns the mean grid and the total clamped-cell count.
pub fn mean_utci(scene: &Scene<'_>, samples: &[MeteoSample], body: &BodyConstants) -> Result<(Grid, usize)> {
    if samples.is_empty() {
        return Err(Error::Validation("no meteo samples at the requested hour".into()));
    }
    let nodata = scene.svf.nodata();
    let mut acc = vec![0.0; scene.svf.len()];
    let mut valid = vec![true; scene.svf.len()];
    let mut clamped = 0;
    for m in samples {
        let h = hourly_utci(scene, m, body)?;
        clamped += h.clamped_cells;
        for (i, v) in h.utci.values().iter().enumerate() {
            if h.utci.is_nodata(*v) {
                valid[i] = false;
            } else {
                acc[i] += v;
            }
        }
    }
    let n = samples.len() as f64;
    let vals = acc
        .iter()
        .zip(&valid)
        .map(|(a, ok)| if *ok { a / n } else { nodata })
        .collect();
    Ok((scene.svf.with_values(vals)?, clamped))
}
