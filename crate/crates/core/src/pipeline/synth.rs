//! Seeded synthetic city: terrain, street grid with building blocks, canopy,
//! land cover, reflectance bands, LST, square zones, a month of hourly
//! meteorology and a socio-economic table, plus a ready-to-run config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Duration, TimeZone, Timelike, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::indices::Band;
use crate::microclimate::{format_meteo_csv, solar_position, MeteoSample};
use crate::raster::{write_grid, Grid, GridFormat, GridHeader, ZoneSet, DEFAULT_NODATA};
use crate::rng;

pub const CELL_SIZE: f64 = 2.0;
/// Zone edge length in cells.
pub const ZONE_CELLS: usize = 8;
const BLOCK: usize = 16;
const STREET: usize = 4;
const WATER_COLS: usize = 6;

pub const CLASS_BUILDING: i64 = 1;
pub const CLASS_TREE: i64 = 2;
pub const CLASS_GRASS: i64 = 3;
pub const CLASS_PAVED: i64 = 4;
pub const CLASS_WATER: i64 = 5;

/// Per-class reflectance in band order blue, green, red, nir, swir1, swir2.
const REFLECTANCE: [[f64; 6]; 5] = [
    [0.12, 0.13, 0.15, 0.20, 0.25, 0.22],
    [0.03, 0.06, 0.04, 0.40, 0.18, 0.08],
    [0.04, 0.08, 0.06, 0.35, 0.22, 0.12],
    [0.10, 0.11, 0.12, 0.16, 0.22, 0.20],
    [0.06, 0.05, 0.03, 0.02, 0.01, 0.01],
];

/// LST base by class (°C): building, tree, grass, paved, water.
const LST_BASE: [f64; 5] = [36.0, 29.0, 32.0, 38.0, 27.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Built,
    Park,
    Plaza,
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub dir: PathBuf,
    pub config_path: PathBuf,
    pub size: usize,
    /// 0 for the western (dense, tall) regime, 1 for the eastern one.
    pub zone_regime: BTreeMap<i64, u8>,
    /// Centre cells (row, col) of open plazas.
    pub plazas: Vec<(usize, usize)>,
    /// Street cells (row, col) between two built blocks.
    pub canyons: Vec<(usize, usize)>,
}

fn header(size: usize) -> GridHeader {
    GridHeader { width: size, height: size, origin_x: 0.0, origin_y: 0.0, cell_size: CELL_SIZE, nodata: DEFAULT_NODATA }
}

fn write(dir: &Path, name: &str, size: usize, values: Vec<f64>) -> Result<()> {
    let g = Grid::new(header(size), values)?;
    write_grid(&g, &dir.join(name), GridFormat::EsriAscii)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Gradient-boosting neighbourhood candidates scaled to the zone count.
pub fn default_candidates(n_zones: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [0.15, 0.25, 0.4, 0.6]
        .iter()
        .map(|f| ((n_zones as f64 * f).round() as usize).max(10))
        .chain(std::iter::once(n_zones.saturating_sub(1)))
        .filter(|&k| k >= 10 && k < n_zones)
        .collect();
    c.dedup();
    c
}

/// Writes a synthetic city of `size`×`size` cells into `dir`.
pub fn make_synthetic_city(seed: u64, size: usize, dir: &Path) -> Result<SyntheticCity> {
    if size < 64 {
        return Err(Error::Validation(format!("synthetic city needs size >= 64, got {size}")));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let base = rng::derive_seed_str(seed, "synthetic-city");
    let n = size * size;
    let idx = |r: usize, c: usize| r * size + c;
    let regime_of_col = |c: usize| u8::from(c >= size / 2);
    let water_start = size - WATER_COLS;

    let mut dem = vec![0.0; n];
    for r in 0..size {
        for c in 0..size {
            let north = 1.0 - r as f64 / size as f64;
            let wave = (3.0 * std::f64::consts::PI * c as f64 / size as f64).sin();
            dem[idx(r, c)] = if c >= water_start { 0.0 } else { 3.0 + 10.0 * north + 1.5 * wave };
        }
    }

    let mut class = vec![CLASS_PAVED; n];
    let mut bh = vec![0.0; n];
    let mut blocks: Vec<(usize, usize, BlockKind)> = Vec::new();
    let mut brng = rng::stream(base, 1);
    for br in (0..size).step_by(BLOCK) {
        for bc in (0..size).step_by(BLOCK) {
            let (r0, c0) = (br + STREET, bc + STREET);
            if r0 >= size || c0 >= water_start {
                continue;
            }
            let (r1, c1) = ((br + BLOCK).min(size), (bc + BLOCK).min(water_start));
            if r1 <= r0 + 2 || c1 <= c0 + 2 {
                continue;
            }
            let east = regime_of_col(c0) == 1;
            let u: f64 = brng.random();
            let kind = if u < 0.15 {
                BlockKind::Plaza
            } else if u < if east { 0.45 } else { 0.25 } {
                BlockKind::Park
            } else {
                BlockKind::Built
            };
            blocks.push((r0, c0, kind));
            match kind {
                BlockKind::Plaza => {}
                BlockKind::Park => {
                    for r in r0..r1 {
                        for c in c0..c1 {
                            class[idx(r, c)] = CLASS_GRASS;
                        }
                    }
                }
                BlockKind::Built => {
                    for r in r0..r1 {
                        for c in c0..c1 {
                            class[idx(r, c)] = if brng.random::<f64>() < 0.3 { CLASS_GRASS } else { CLASS_PAVED };
                        }
                    }
                    let nb = brng.random_range(1..=3usize);
                    for _ in 0..nb {
                        let h = if east { brng.random_range(6.0..20.0) } else { brng.random_range(20.0..60.0) };
                        let hh = brng.random_range(4..=(r1 - r0));
                        let ww = brng.random_range(4..=(c1 - c0));
                        let rr = r0 + brng.random_range(0..=(r1 - r0 - hh));
                        let cc = c0 + brng.random_range(0..=(c1 - c0 - ww));
                        for r in rr..rr + hh {
                            for c in cc..cc + ww {
                                class[idx(r, c)] = CLASS_BUILDING;
                                bh[idx(r, c)] = f64::max(bh[idx(r, c)], h);
                            }
                        }
                    }
                }
            }
        }
    }
    for r in 0..size {
        for c in water_start..size {
            class[idx(r, c)] = CLASS_WATER;
        }
    }

    // Canopy blobs: dense in parks, sparse along streets, more in the east.
    let mut canopy = vec![0.0; n];
    let mut crng = rng::stream(base, 2);
    let n_blobs = size * size / 120;
    for _ in 0..n_blobs {
        let r0 = crng.random_range(0..size);
        let c0 = crng.random_range(0..water_start);
        let k = class[idx(r0, c0)];
        let east = regime_of_col(c0) == 1;
        let keep = match k {
            CLASS_GRASS => 0.9,
            CLASS_PAVED => {
                if east {
                    0.5
                } else {
                    0.2
                }
            }
            _ => 0.0,
        };
        if crng.random::<f64>() >= keep {
            continue;
        }
        let rad = crng.random_range(2.0..5.0f64);
        let top = crng.random_range(6.0..14.0);
        let ri = rad.ceil() as isize;
        for dr in -ri..=ri {
            for dc in -ri..=ri {
                let (r, c) = (r0 as isize + dr, c0 as isize + dc);
                if r < 0 || c < 0 || r >= size as isize || c >= water_start as isize {
                    continue;
                }
                let d = ((dr * dr + dc * dc) as f64).sqrt();
                let i = idx(r as usize, c as usize);
                if d <= rad && class[i] != CLASS_BUILDING && class[i] != CLASS_WATER {
                    let h = top * (1.0 - 0.4 * (d / rad).powi(2));
                    canopy[i] = f64::max(canopy[i], h);
                }
            }
        }
    }
    for i in 0..n {
        if canopy[i] > 0.0 {
            class[i] = CLASS_TREE;
        }
    }

    let dsm: Vec<f64> = (0..n).map(|i| dem[i] + bh[i]).collect();
    write(dir, "dem.asc", size, dem.clone())?;
    write(dir, "dsm.asc", size, dsm)?;
    write(dir, "cdsm.asc", size, canopy)?;
    write(dir, "landcover.asc", size, class.iter().map(|&k| k as f64).collect())?;

    let noise = Normal::new(0.0, 0.01).expect("valid sd");
    let mut nrng = rng::stream(base, 3);
    let bands_dir = dir.join("bands");
    std::fs::create_dir_all(&bands_dir).map_err(|e| Error::io(&bands_dir, e))?;
    let mut manifest = BTreeMap::new();
    for (b, band) in Band::ALL.iter().enumerate() {
        let vals: Vec<f64> = class
            .iter()
            .map(|&k| (REFLECTANCE[(k - 1) as usize][b] + noise.sample(&mut nrng)).clamp(0.001, 1.0))
            .collect();
        let name = format!("{}.asc", band.name());
        write(&bands_dir, &name, size, vals)?;
        manifest.insert(band.name().to_string(), format!("bands/{name}"));
    }
    write_text(&dir.join("bands.json"), &serde_json::to_string_pretty(&manifest).expect("map serialises"))?;

    // LST: class base plus an elevation term whose sign flips between regimes.
    let lst_noise = Normal::new(0.0, 0.5).expect("valid sd");
    let mut lrng = rng::stream(base, 4);
    let lst: Vec<f64> = (0..n)
        .map(|i| {
            let c = i % size;
            let k = class[i];
            let slope = if regime_of_col(c) == 0 { 0.8 } else { -0.8 };
            let elev = if k == CLASS_WATER { 0.0 } else { slope * (dem[i] - 8.0) };
            LST_BASE[(k - 1) as usize] + elev + lst_noise.sample(&mut lrng)
        })
        .collect();
    write(dir, "lst.asc", size, lst)?;

    let zr = size / ZONE_CELLS;
    let zone_size = ZONE_CELLS as f64 * CELL_SIZE;
    let y0 = (size - zr * ZONE_CELLS) as f64 * CELL_SIZE;
    let zones = ZoneSet::square_lattice(0.0, y0, zone_size, zr, zr, 1);
    write_text(&dir.join("zones.geojson"), &zones.to_geojson())?;
    let mut zone_regime = BTreeMap::new();
    for (z, (x, _)) in zones.ids().into_iter().zip(zones.centroids()) {
        zone_regime.insert(z, u8::from(x >= size as f64 * CELL_SIZE / 2.0));
    }

    write_text(&dir.join("meteo.csv"), &format_meteo_csv(&synthetic_meteo(rng::derive_seed(base, 5))))?;

    let mut srng = rng::stream(base, 6);
    let mut socio = String::from("zone_id,PopD,RD\n");
    for z in zones.ids() {
        let pop: f64 = srng.random_range(2000.0..30000.0);
        let rd: f64 = srng.random_range(5.0..25.0);
        socio.push_str(&format!("{z},{pop},{rd}\n"));
    }
    write_text(&dir.join("socio.csv"), &socio)?;

    let candidates = default_candidates(zones.len());
    let config = format!(
        r#"seed = {seed}
output_dir = "out"

[inputs]
dsm = "dsm.asc"
dem = "dem.asc"
cdsm = "cdsm.asc"
landcover = "landcover.asc"
bands = "bands.json"
lst = "lst.asc"
zones = "zones.geojson"
meteo = "meteo.csv"
socio = "socio.csv"

[site]
latitude = 1.35
longitude = 103.8
utc_offset = 8

[model.base]
n_estimators = 150
learning_rate = 0.1
max_depth = 2
subsample = 0.8

[model.grid]
max_depth = [2, 3]
learning_rate = [0.05, 0.1]

[gwboost]
candidates = {candidates:?}
residual_permutations = 199

[spatial]
permutations = 199
"#
    );
    let config_path = dir.join("run.toml");
    write_text(&config_path, &config)?;

    let plazas = blocks
        .iter()
        .filter(|b| b.2 == BlockKind::Plaza)
        .map(|&(r0, c0, _)| (r0 + (BLOCK - STREET) / 2, c0 + (BLOCK - STREET) / 2))
        .collect();
    let built: std::collections::HashSet<(usize, usize)> =
        blocks.iter().filter(|b| b.2 == BlockKind::Built).map(|b| (b.0, b.1)).collect();
    let mut canyons = Vec::new();
    for &(r0, c0) in &built {
        if built.contains(&(r0, c0 + BLOCK)) {
            let c = c0 + BLOCK - STREET / 2;
            for r in r0..(r0 + BLOCK - STREET).min(size) {
                canyons.push((r, c));
            }
        }
    }
    canyons.sort_unstable();

    Ok(SyntheticCity { dir: dir.to_path_buf(), config_path, size, zone_regime, plazas, canyons })
}

/// Hourly May meteorology for a humid tropical site (timestamps UTC).
fn synthetic_meteo(seed: u64) -> Vec<MeteoSample> {
    let mut r: ChaCha8Rng = rng::stream(seed, 0);
    let tn = Normal::new(0.0, 0.4).expect("valid sd");
    let start = Utc.with_ymd_and_hms(2024, 4, 30, 16, 0, 0).single().expect("valid date");
    (0..31 * 24)
        .map(|h| {
            let t = start + Duration::hours(h);
            let local = (t + Duration::hours(8)).hour() as f64;
            let phase = (2.0 * std::f64::consts::PI * (local - 9.0) / 24.0).sin();
            let ta = 28.5 + 3.5 * phase + tn.sample(&mut r);
            let rh = (80.0 - 15.0 * phase + 3.0 * tn.sample(&mut r)).clamp(40.0, 98.0);
            let wind10 = (2.2 + 0.6 * phase + tn.sample(&mut r).abs()).max(0.5);
            let sun = solar_position(1.35, 103.8, &t);
            let (ghi, dni, dhi) = if sun.altitude > 0.0 {
                let s = sun.altitude.to_radians().sin();
                let cloud: f64 = r.random_range(0.7..1.0);
                let ghi = 1050.0 * s.powf(1.15) * cloud;
                let dhi = ghi * (0.2 + 0.3 * (1.0 - cloud));
                let dni = ((ghi - dhi) / s.max(0.05)).min(1000.0);
                (ghi, dni, dhi)
            } else {
                (0.0, 0.0, 0.0)
            };
            MeteoSample { timestamp: t, ta, rh, wind10, ghi, dni, dhi }
        })
        .collect()
}
