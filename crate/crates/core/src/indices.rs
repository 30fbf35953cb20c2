//! Spectral and environmental covariates computed from surface-reflectance
//! band grids.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{read_grid_auto, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Blue,
    Green,
    Red,
    Nir,
    Swir1,
    Swir2,
}

impl Band {
    pub const ALL: [Band; 6] = [Band::Blue, Band::Green, Band::Red, Band::Nir, Band::Swir1, Band::Swir2];

    pub fn name(self) -> &'static str {
        match self {
            Band::Blue => "blue",
            Band::Green => "green",
            Band::Red => "red",
            Band::Nir => "nir",
            Band::Swir1 => "swir1",
            Band::Swir2 => "swir2",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Band::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown band '{s}'")))
    }
}

/// Reflectance grids sharing one georeference.
#[derive(Debug, Clone, Default)]
pub struct BandStack {
    bands: BTreeMap<Band, Grid>,
}

impl BandStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a band; it must align with the bands already present.
    pub fn insert(&mut self, band: Band, grid: Grid) -> Result<()> {
        if let Some((other, g)) = self.bands.iter().next() {
            g.ensure_aligned(&grid, &format!("band {band} vs {other}"))?;
        }
        self.bands.insert(band, grid);
        Ok(())
    }

    pub fn get(&self, band: Band) -> Result<&Grid> {
        self.bands
            .get(&band)
            .ok_or_else(|| Error::Validation(format!("missing band: {band}")))
    }

    pub fn contains(&self, band: Band) -> bool {
        self.bands.contains_key(&band)
    }

    /// Loads a `bands.json` manifest mapping band names to grid paths
    /// (relative paths resolve against the manifest's directory).
    pub fn from_manifest(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut stack = BandStack::new();
        for (name, p) in map {
            let band: Band = name.parse()?;
            let gp = base.join(p);
            stack.insert(band, read_grid_auto(&gp)?)?;
        }
        Ok(stack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Ndvi,
    Ndbi,
    Wet,
    Albedo,
}

impl FromStr for IndexKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndvi" => Ok(IndexKind::Ndvi),
            "ndbi" => Ok(IndexKind::Ndbi),
            "wet" => Ok(IndexKind::Wet),
            "albedo" => Ok(IndexKind::Albedo),
            _ => Err(Error::Validation(format!("unknown index kind '{s}'"))),
        }
    }
}

impl IndexKind {
    pub fn required_bands(self) -> &'static [Band] {
        match self {
            IndexKind::Ndvi => &[Band::Red, Band::Nir],
            IndexKind::Ndbi => &[Band::Swir1, Band::Nir],
            IndexKind::Wet | IndexKind::Albedo => &Band::ALL,
        }
    }
}

/// Broadband albedo weights in band order blue, green, red, NIR, SWIR1, SWIR2.
pub const ALBEDO_WEIGHTS: [f64; 6] = [0.2453, 0.0508, 0.1804, 0.3081, 0.1332, 0.0521];
pub const ALBEDO_OFFSET: f64 = 0.0011;
/// Tasseled-cap wetness weights in band order blue, green, red, NIR, SWIR1, SWIR2.
pub const WET_WEIGHTS: [f64; 6] = [0.1511, 0.1972, 0.3283, 0.3407, -0.7117, -0.4559];

fn normalized_difference(a: f64, b: f64) -> Option<f64> {
    let den = a + b;
    if den == 0.0 {
        None
    } else {
        Some(((a - b) / den).clamp(-1.0, 1.0))
    }
}

/// Evaluates one index cellwise. Nodata in any required band, or a zero
/// denominator for the normalised differences, yields nodata.
pub fn compute_index(kind: IndexKind, bands: &BandStack) -> Result<Grid> {
    let req = kind.required_bands();
    let grids: Vec<&Grid> = req.iter().map(|b| bands.get(*b)).collect::<Result<_>>()?;
    let template = grids[0];
    let nodata = template.nodata();
    Ok(template.map_cells(|r, c| {
        let mut vals = [0.0f64; 6];
        for (k, g) in grids.iter().enumerate() {
            match g.value(r, c) {
                Some(v) => vals[k] = v,
                None => return nodata,
            }
        }
        let out = match kind {
            IndexKind::Ndvi => normalized_difference(vals[1], vals[0]),
            IndexKind::Ndbi => normalized_difference(vals[0], vals[1]),
            IndexKind::Wet => Some(WET_WEIGHTS.iter().zip(&vals).map(|(w, v)| w * v).sum()),
            IndexKind::Albedo => {
                Some(ALBEDO_WEIGHTS.iter().zip(&vals).map(|(w, v)| w * v).sum::<f64>() + ALBEDO_OFFSET)
            }
        };
        out.unwrap_or(nodata)
    }))
}
