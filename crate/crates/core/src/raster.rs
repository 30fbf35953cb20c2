//! Georeferenced grids, zone polygons and the raster utilities every other
//! module builds on.
//!
//! Conventions: square cells, row-major storage with row 0 the northern-most
//! row (as in ESRI ASCII files), origin at the lower-left corner of the
//! lower-left cell, and every value sampled at cell centres.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const DEFAULT_NODATA: f64 = -9999.0;

/// A georeferenced 2D scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    origin_x: f64,
    origin_y: f64,
    cell_size: f64,
    nodata: f64,
    values: Vec<f64>,
}

/// Header shared by grids on the same lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub width: usize,
    pub height: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub nodata: f64,
}

impl Grid {
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        let g = Grid {
            width: header.width,
            height: header.height,
            origin_x: header.origin_x,
            origin_y: header.origin_y,
            cell_size: header.cell_size,
            nodata: header.nodata,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid filled with a constant.
    pub fn filled(header: GridHeader, value: f64) -> Self {
        Grid {
            width: header.width,
            height: header.height,
            origin_x: header.origin_x,
            origin_y: header.origin_y,
            cell_size: header.cell_size,
            nodata: header.nodata,
            values: vec![value; header.width * header.height],
        }
    }

    /// Grid with the same georeference as `self` holding `values`.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Grid::new(self.header(), values)
    }

    /// Same georeference, every cell computed by `f(row, col)`; evaluated in
    /// parallel over rows.
    pub fn map_cells<F>(&self, f: F) -> Grid
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let w = self.width;
        let mut values = vec![0.0; self.values.len()];
        values
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = f(r, c);
                }
            });
        Grid {
            width: self.width,
            height: self.height,
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            cell_size: self.cell_size,
            nodata: self.nodata,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("grid width and height must be >= 1".into()));
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::Validation(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.values.len() != self.width * self.height {
            return Err(Error::Structure(format!(
                "expected {}x{} = {} values, found {}",
                self.width,
                self.height,
                self.width * self.height,
                self.values.len()
            )));
        }
        if let Some(i) = self
            .values
            .iter()
            .position(|v| !self.is_nodata(*v) && !v.is_finite())
        {
            return Err(Error::Validation(format!(
                "non-finite value at row {}, col {}",
                i / self.width,
                i % self.width
            )));
        }
        Ok(())
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            width: self.width,
            height: self.height,
            origin_x: self.origin_x,
            origin_y: self.origin_y,
            cell_size: self.cell_size,
            nodata: self.nodata,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }
    pub fn nodata(&self) -> f64 {
        self.nodata
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || v.is_nan()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Value at `(row, col)` or `None` when the cell holds nodata.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (!self.is_nodata(v)).then_some(v)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.index(row, col);
        self.values[i] = v;
    }

    /// World coordinates of the centre of `(row, col)`.
    #[inline]
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + ((self.height - row) as f64 - 0.5) * self.cell_size,
        )
    }

    /// Fractional (row, col) index of a world point, cell centres at integers.
    #[inline]
    pub fn fractional_index(&self, x: f64, y: f64) -> (f64, f64) {
        let col = (x - self.origin_x) / self.cell_size - 0.5;
        let top = self.origin_y + self.height as f64 * self.cell_size;
        let row = (top - y) / self.cell_size - 0.5;
        (row, col)
    }

    pub fn count_nodata(&self) -> usize {
        self.values.iter().filter(|v| self.is_nodata(**v)).count()
    }

    /// (min, max) over valid cells, `None` when every cell is nodata.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| !self.is_nodata(**v))
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// True when `other` shares dimensions, origin and cell size.
    pub fn is_aligned(&self, other: &Grid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.cell_size == other.cell_size
            && self.origin_x == other.origin_x
            && self.origin_y == other.origin_y
    }

    pub fn ensure_aligned(&self, other: &Grid, what: &str) -> Result<()> {
        if self.is_aligned(other) {
            Ok(())
        } else {
            Err(Error::Misaligned(format!(
                "{what}: {}x{} @ ({}, {}) cs {} vs {}x{} @ ({}, {}) cs {}",
                self.width,
                self.height,
                self.origin_x,
                self.origin_y,
                self.cell_size,
                other.width,
                other.height,
                other.origin_x,
                other.origin_y,
                other.cell_size
            )))
        }
    }

    /// Bilinear sample at a fractional index with edge clamping. Nodata
    /// support cells are not screened here; callers working on complete
    /// surfaces (DSMs) use this in inner loops.
    #[inline]
    pub fn sample_index_clamped(&self, row: f64, col: f64) -> f64 {
        bilinear_raw(&self.values, self.width, self.height, row, col)
    }
}

#[inline]
pub(crate) fn bilinear_raw(values: &[f64], width: usize, height: usize, row: f64, col: f64) -> f64 {
    let r = row.clamp(0.0, (height - 1) as f64);
    let c = col.clamp(0.0, (width - 1) as f64);
    let r0 = r.floor() as usize;
    let c0 = c.floor() as usize;
    let r1 = (r0 + 1).min(height - 1);
    let c1 = (c0 + 1).min(width - 1);
    let tr = r - r0 as f64;
    let tc = c - c0 as f64;
    let v00 = values[r0 * width + c0];
    let v01 = values[r0 * width + c1];
    let v10 = values[r1 * width + c0];
    let v11 = values[r1 * width + c1];
    let top = v00 + tc * (v01 - v00);
    let bottom = v10 + tc * (v11 - v10);
    top + tr * (bottom - top)
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

/// On-disk grid encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    /// ESRI ASCII grid (`.asc`).
    EsriAscii,
    /// Little-endian 32-bit float body (`.f32`) with a JSON sidecar header.
    RawF32,
}

impl GridFormat {
    /// Picks the format from the file extension (`.f32` → raw, otherwise ASCII).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("f32") => GridFormat::RawF32,
            _ => GridFormat::EsriAscii,
        }
    }
}

/// Sidecar path of a raw grid: `dsm.f32` → `dsm.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn read_grid(path: &Path, format: GridFormat) -> Result<Grid> {
    match format {
        GridFormat::EsriAscii => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_ascii(&text)
        }
        GridFormat::RawF32 => read_raw(path),
    }
}

/// Reads a grid choosing the format from the extension.
pub fn read_grid_auto(path: &Path) -> Result<Grid> {
    read_grid(path, GridFormat::from_path(path))
}

pub fn write_grid(grid: &Grid, path: &Path, format: GridFormat) -> Result<()> {
    grid.validate()?;
    match format {
        GridFormat::EsriAscii => {
            let text = format_ascii(grid);
            fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        GridFormat::RawF32 => write_raw(grid, path),
    }
}

pub fn write_grid_auto(grid: &Grid, path: &Path) -> Result<()> {
    write_grid(grid, path, GridFormat::from_path(path))
}

/// Parses the text of an ESRI ASCII grid.
pub fn parse_ascii(text: &str) -> Result<Grid> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut center_x = false;
    let mut center_y = false;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    let mut body_start_line = 0;
    while let Some(&(i, line)) = lines.peek() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        let first = trimmed.split_whitespace().next().unwrap_or("");
        if first.parse::<f64>().is_ok() || first.eq_ignore_ascii_case("nan") {
            body_start_line = i;
            break;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or("").to_ascii_lowercase();
        let raw = parts.next().ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("header key '{key}' has no value"),
        })?;
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid number '{s}' for '{key}'"),
            })
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid integer '{s}' for '{key}'"),
            })
        };
        match key.as_str() {
            "ncols" => ncols = Some(int(raw)?),
            "nrows" => nrows = Some(int(raw)?),
            "xllcorner" => xll = Some(num(raw)?),
            "yllcorner" => yll = Some(num(raw)?),
            "xllcenter" => {
                xll = Some(num(raw)?);
                center_x = true;
            }
            "yllcenter" => {
                yll = Some(num(raw)?);
                center_y = true;
            }
            "cellsize" => cellsize = Some(num(raw)?),
            "nodata_value" => nodata = Some(num(raw)?),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown header key '{key}'"),
                })
            }
        }
        lines.next();
        body_start_line = i + 1;
    }

    let missing = |k: &str| Error::Parse {
        line: body_start_line + 1,
        message: format!("header is missing '{k}'"),
    };
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut xll = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut yll = yll.ok_or_else(|| missing("yllcorner"))?;
    if center_x {
        xll -= cellsize / 2.0;
    }
    if center_y {
        yll -= cellsize / 2.0;
    }
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);

    let mut values = Vec::with_capacity(ncols * nrows);
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid cell value '{tok}'"),
            })?;
            values.push(v);
        }
    }
    if values.len() != ncols * nrows {
        return Err(Error::Structure(format!(
            "header declares {ncols}x{nrows} = {} cells but body holds {}",
            ncols * nrows,
            values.len()
        )));
    }
    Grid::new(
        GridHeader {
            width: ncols,
            height: nrows,
            origin_x: xll,
            origin_y: yll,
            cell_size: cellsize,
            nodata,
        },
        values,
    )
}

/// Formats a grid as ESRI ASCII. Values are written in shortest round-trip
/// form, so reading the file back reproduces every `f64` exactly.
pub fn format_ascii(grid: &Grid) -> String {
    let mut s = String::with_capacity(grid.len() * 8 + 128);
    let _ = writeln!(s, "ncols {}", grid.width);
    let _ = writeln!(s, "nrows {}", grid.height);
    let _ = writeln!(s, "xllcorner {}", grid.origin_x);
    let _ = writeln!(s, "yllcorner {}", grid.origin_y);
    let _ = writeln!(s, "cellsize {}", grid.cell_size);
    let _ = writeln!(s, "NODATA_value {}", grid.nodata);
    for r in 0..grid.height {
        let row = &grid.values[r * grid.width..(r + 1) * grid.width];
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                s.push(' ');
            }
            let v = if v.is_nan() { grid.nodata } else { *v };
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize, Deserialize)]
struct RawSidecar {
    width: usize,
    height: usize,
    origin_x: f64,
    origin_y: f64,
    cell_size: f64,
    nodata: f64,
}

fn read_raw(path: &Path) -> Result<Grid> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let header: RawSidecar = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("sidecar {}: {e}", side.display()),
    })?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n = header.width * header.height;
    if bytes.len() != n * 4 {
        return Err(Error::Structure(format!(
            "raw body holds {} bytes, expected {} for {}x{} cells",
            bytes.len(),
            n * 4,
            header.width,
            header.height
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Grid::new(
        GridHeader {
            width: header.width,
            height: header.height,
            origin_x: header.origin_x,
            origin_y: header.origin_y,
            cell_size: header.cell_size,
            nodata: header.nodata,
        },
        values,
    )
}

fn write_raw(grid: &Grid, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(grid.len() * 4);
    for v in &grid.values {
        let v = if v.is_nan() { grid.nodata } else { *v };
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let header = RawSidecar {
        width: grid.width,
        height: grid.height,
        origin_x: grid.origin_x,
        origin_y: grid.origin_y,
        cell_size: grid.cell_size,
        nodata: (grid.nodata as f32) as f64,
    };
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::Other(e.to_string()))?;
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

// ---------------------------------------------------------------------------
// Zones
// ---------------------------------------------------------------------------

pub type Ring = Vec<[f64; 2]>;

/// A planning zone: one outer ring plus optional holes, in grid CRS metres.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: i64,
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

impl Zone {
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    /// Even–odd point-in-polygon test. Points on bottom/left edges are
    /// inside, points on top/right edges outside (half-open rule).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let mut inside = false;
        for ring in self.rings() {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a[1] > y) != (b[1] > y) {
                    let xi = a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                    if x < xi {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    fn ring_signed_area_centroid(ring: &Ring) -> (f64, f64, f64) {
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for w in ring.windows(2) {
            let cross = w[0][0] * w[1][1] - w[1][0] * w[0][1];
            a += cross;
            cx += (w[0][0] + w[1][0]) * cross;
            cy += (w[0][1] + w[1][1]) * cross;
        }
        (a / 2.0, cx, cy)
    }

    /// Polygon area (outer minus holes).
    pub fn area(&self) -> f64 {
        let outer = Self::ring_signed_area_centroid(&self.outer).0.abs();
        let holes: f64 = self
            .holes
            .iter()
            .map(|h| Self::ring_signed_area_centroid(h).0.abs())
            .sum();
        outer - holes
    }

    /// Area centroid of the polygon.
    pub fn centroid(&self) -> (f64, f64) {
        let (a0, cx0, cy0) = Self::ring_signed_area_centroid(&self.outer);
        let sign = a0.signum();
        let mut a = a0 * sign;
        let mut cx = cx0 * sign;
        let mut cy = cy0 * sign;
        for h in &self.holes {
            let (ah, cxh, cyh) = Self::ring_signed_area_centroid(h);
            let s = ah.signum();
            a -= ah * s;
            cx -= cxh * s;
            cy -= cyh * s;
        }
        (cx / (6.0 * a), cy / (6.0 * a))
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.outer {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }
}

/// A collection of zones with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneSet {
    pub zones: Vec<Zone>,
}

impl ZoneSet {
    pub fn new(zones: Vec<Zone>) -> Result<Self> {
        let zs = ZoneSet { zones };
        zs.validate()?;
        Ok(zs)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<i64> = self.zones.iter().map(|z| z.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate zone_id {}", w[0])));
        }
        for z in &self.zones {
            for ring in z.rings() {
                if ring.len() < 4 {
                    return Err(Error::Validation(format!(
                        "zone {}: ring has {} vertices, at least 4 required",
                        z.id,
                        ring.len()
                    )));
                }
                if ring.first() != ring.last() {
                    return Err(Error::Validation(format!("zone {}: ring is not closed", z.id)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn ids(&self) -> Vec<i64> {
        self.zones.iter().map(|z| z.id).collect()
    }

    pub fn centroids(&self) -> Vec<(f64, f64)> {
        self.zones.iter().map(|z| z.centroid()).collect()
    }

    /// Regular lattice of square zones covering `[x0, x0 + cols*size] × [y0, y0 + rows*size]`.
    /// Ids run row-major from the northern row, starting at `first_id`.
    pub fn square_lattice(x0: f64, y0: f64, size: f64, rows: usize, cols: usize, first_id: i64) -> Self {
        let mut zones = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let left = x0 + c as f64 * size;
                let bottom = y0 + (rows - 1 - r) as f64 * size;
                zones.push(Zone {
                    id: first_id + (r * cols + c) as i64,
                    outer: vec![
                        [left, bottom],
                        [left + size, bottom],
                        [left + size, bottom + size],
                        [left, bottom + size],
                        [left, bottom],
                    ],
                    holes: vec![],
                });
            }
        }
        ZoneSet { zones }
    }

    /// Parses a GeoJSON FeatureCollection of Polygons carrying an integer
    /// `zone_id` property.
    pub fn from_geojson(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let feats = v
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Validation("GeoJSON has no 'features' array".into()))?;
        let mut zones = Vec::with_capacity(feats.len());
        for (k, f) in feats.iter().enumerate() {
            let id = f
                .pointer("/properties/zone_id")
                .and_then(Value::as_i64)
                .ok_or_else(|| Error::Validation(format!("feature {k}: missing integer zone_id")))?;
            let geom = f
                .get("geometry")
                .ok_or_else(|| Error::Validation(format!("feature {k}: missing geometry")))?;
            if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
                return Err(Error::Validation(format!("zone {id}: only Polygon geometries are supported")));
            }
            let rings = geom
                .get("coordinates")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Validation(format!("zone {id}: missing coordinates")))?;
            let mut parsed: Vec<Ring> = Vec::with_capacity(rings.len());
            for ring in rings {
                let pts = ring
                    .as_array()
                    .ok_or_else(|| Error::Validation(format!("zone {id}: ring is not an array")))?;
                let mut out = Vec::with_capacity(pts.len());
                for p in pts {
                    let x = p.get(0).and_then(Value::as_f64);
                    let y = p.get(1).and_then(Value::as_f64);
                    match (x, y) {
                        (Some(x), Some(y)) => out.push([x, y]),
                        _ => return Err(Error::Validation(format!("zone {id}: bad vertex"))),
                    }
                }
                parsed.push(out);
            }
            if parsed.is_empty() {
                return Err(Error::Validation(format!("zone {id}: polygon has no rings")));
            }
            let outer = parsed.remove(0);
            zones.push(Zone {
                id,
                outer,
                holes: parsed,
            });
        }
        ZoneSet::new(zones)
    }

    pub fn to_geojson(&self) -> String {
        let features: Vec<Value> = self
            .zones
            .iter()
            .map(|z| {
                let rings: Vec<Value> = z.rings().map(|r| json!(r)).collect();
                json!({
                    "type": "Feature",
                    "properties": {"zone_id": z.id},
                    "geometry": {"type": "Polygon", "coordinates": rings}
                })
            })
            .collect();
        serde_json::to_string_pretty(&json!({"type": "FeatureCollection", "features": features}))
            .expect("geojson serialisation")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_geojson(&text)
    }
}

/// Burns zone ids into a grid on `template`'s lattice. Each cell centre is
/// tested against every zone; a cell inside several zones takes the lowest
/// id. Cells outside every zone are nodata.
pub fn rasterize_zones(zones: &ZoneSet, template: &Grid) -> Result<Grid> {
    zones.validate()?;
    let mut order: Vec<&Zone> = zones.zones.iter().collect();
    order.sort_by_key(|z| z.id);
    let boxes: Vec<[f64; 4]> = order.iter().map(|z| z.bbox()).collect();
    let nodata = template.nodata();
    Ok(template.map_cells(|r, c| {
        let (x, y) = template.cell_center(r, c);
        for (z, b) in order.iter().zip(&boxes) {
            if x < b[0] || x > b[2] || y < b[1] || y > b[3] {
                continue;
            }
            if z.contains(x, y) {
                return z.id as f64;
            }
        }
        nodata
    }))
}

// ---------------------------------------------------------------------------
// Distance transform
// ---------------------------------------------------------------------------

/// Exact squared-distance transform of a 1D sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            let p = v[k];
            if f[p].is_infinite() {
                // the envelope so far is empty
                v[k] = q;
                z[k] = f64::NEG_INFINITY;
                z[k + 1] = f64::INFINITY;
                break;
            }
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]].is_infinite() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance (metres) from every cell centre to the nearest
/// cell whose mask value is 1. Nodata mask cells are treated as non-targets
/// and receive nodata in the output.
pub fn distance_to_mask(mask: &Grid) -> Result<Grid> {
    let (w, h) = (mask.width(), mask.height());
    let mut f = vec![f64::INFINITY; w * h];
    let mut any = false;
    for (i, v) in mask.values().iter().enumerate() {
        if !mask.is_nodata(*v) && *v == 1.0 {
            f[i] = 0.0;
            any = true;
        }
    }
    if !any {
        return Err(Error::Validation("distance_to_mask: no target cells".into()));
    }
    // columns
    let mut cols = vec![0.0; w * h];
    cols.par_chunks_mut(h).enumerate().for_each(|(c, out)| {
        let col: Vec<f64> = (0..h).map(|r| f[r * w + c]).collect();
        let mut v = vec![0usize; h];
        let mut z = vec![0.0; h + 1];
        edt_1d(&col, out, &mut v, &mut z);
    });
    // rows
    let mut d2 = vec![0.0; w * h];
    d2.par_chunks_mut(w).enumerate().for_each(|(r, out)| {
        let row: Vec<f64> = (0..w).map(|c| cols[c * h + r]).collect();
        let mut v = vec![0usize; w];
        let mut z = vec![0.0; w + 1];
        edt_1d(&row, out, &mut v, &mut z);
    });
    let cs = mask.cell_size();
    let values = d2
        .iter()
        .zip(mask.values())
        .map(|(d, m)| if mask.is_nodata(*m) { mask.nodata() } else { d.sqrt() * cs })
        .collect();
    mask.with_values(values)
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Bilinear interpolation of `src` at the cell centres of `template`, with
/// edge clamping. A cell is nodata when any support cell carrying non-zero
/// weight is nodata.
pub fn resample_bilinear(src: &Grid, template: &Grid) -> Result<Grid> {
    let (w, h) = (src.width(), src.height());
    let out_nodata = template.nodata();
    let out = template.map_cells(|r, c| {
        let (x, y) = template.cell_center(r, c);
        let (fr, fc) = src.fractional_index(x, y);
        let rr = fr.clamp(0.0, (h - 1) as f64);
        let cc = fc.clamp(0.0, (w - 1) as f64);
        let r0 = rr.floor() as usize;
        let c0 = cc.floor() as usize;
        let r1 = (r0 + 1).min(h - 1);
        let c1 = (c0 + 1).min(w - 1);
        let tr = rr - r0 as f64;
        let tc = cc - c0 as f64;
        let support = [
            (r0, c0, (1.0 - tr) * (1.0 - tc)),
            (r0, c1, (1.0 - tr) * tc),
            (r1, c0, tr * (1.0 - tc)),
            (r1, c1, tr * tc),
        ];
        for (sr, sc, wt) in support {
            if wt > 0.0 && src.value(sr, sc).is_none() {
                return out_nodata;
            }
        }
        let v00 = src.get(r0, c0);
        let v01 = src.get(r0, c1);
        let v10 = src.get(r1, c0);
        let v11 = src.get(r1, c1);
        // weights of zero never touch nodata sentinels
        let top = if tc == 0.0 { v00 } else if tc == 1.0 { v01 } else { v00 + tc * (v01 - v00) };
        let bottom = if tc == 0.0 { v10 } else if tc == 1.0 { v11 } else { v10 + tc * (v11 - v10) };
        if tr == 0.0 {
            top
        } else if tr == 1.0 {
            bottom
        } else {
            top + tr * (bottom - top)
        }
    });
    Ok(out)
}
