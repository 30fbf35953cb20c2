//! Operational UTCI polynomial and the UTCI stress scale.
//!
//! The 210 coefficients live in `data/utci_poly.txt` (one term per line:
//! exponents of Ta, wind, Tmrt−Ta and vapour pressure, then the coefficient).
//! The table is embedded at build time and checked against a SHA-256 digest
//! before use; an external copy can be loaded with [`UtciPolynomial::from_file`].

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::Grid;

const EMBEDDED_TABLE: &str = include_str!("../data/utci_poly.txt");
pub const TABLE_SHA256: &str = "7c3da06a6a57bd3910c11564706d61c8849fbafb42a20865e9f5bce8cb391e44";
const TERM_COUNT: usize = 210;

pub const TA_RANGE: (f64, f64) = (-50.0, 50.0);
pub const DELTA_TMRT_RANGE: (f64, f64) = (-30.0, 70.0);
pub const WIND_RANGE: (f64, f64) = (0.5, 17.0);

#[derive(Debug, Clone, PartialEq)]
pub struct UtciPolynomial {
    exps: Vec<[usize; 4]>,
    coefs: Vec<f64>,
}

impl UtciPolynomial {
    /// The shipped table, verified once per process.
    pub fn embedded() -> &'static UtciPolynomial {
        static POLY: OnceLock<UtciPolynomial> = OnceLock::new();
        POLY.get_or_init(|| {
            UtciPolynomial::parse_checked(EMBEDDED_TABLE).expect("embedded UTCI table is corrupt")
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_checked(&text)
    }

    /// Parses a coefficient table after verifying its digest.
    pub fn parse_checked(text: &str) -> Result<Self> {
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        if digest != TABLE_SHA256 {
            return Err(Error::Validation(format!(
                "UTCI coefficient table checksum mismatch: expected {TABLE_SHA256}, got {digest}"
            )));
        }
        Self::parse_unchecked(text)
    }

    fn parse_unchecked(text: &str) -> Result<Self> {
        let mut exps = Vec::with_capacity(TERM_COUNT);
        let mut coefs = Vec::with_capacity(TERM_COUNT);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse {
                line: i + 1,
                message: format!("expected 4 exponents and a coefficient, got '{line}'"),
            };
            if toks.len() != 5 {
                return Err(bad());
            }
            let mut e = [0usize; 4];
            for k in 0..4 {
                e[k] = toks[k].parse().map_err(|_| bad())?;
                if e[k] > 6 {
                    return Err(bad());
                }
            }
            exps.push(e);
            coefs.push(toks[4].parse().map_err(|_| bad())?);
        }
        if exps.len() != TERM_COUNT {
            return Err(Error::Structure(format!(
                "UTCI table has {} terms, expected {TERM_COUNT}",
                exps.len()
            )));
        }
        Ok(UtciPolynomial { exps, coefs })
    }

    /// Polynomial value for in-range arguments (no clamping): Ta plus the
    /// offset sum. `pa` is vapour pressure in kPa.
    pub fn evaluate(&self, ta: f64, va: f64, d_tmrt: f64, pa: f64) -> f64 {
        let pw = |x: f64| {
            let mut p = [1.0; 7];
            for k in 1..7 {
                p[k] = p[k - 1] * x;
            }
            p
        };
        let (pt, pv, pd, pp) = (pw(ta), pw(va), pw(d_tmrt), pw(pa));
        let mut s = 0.0;
        for (e, c) in self.exps.iter().zip(&self.coefs) {
            s += c * pt[e[0]] * pv[e[1]] * pd[e[2]] * pp[e[3]];
        }
        ta + s
    }

    /// UTCI from air temperature (°C), mean radiant temperature (°C), 10 m
    /// wind (m/s) and relative humidity (%), with inputs clamped to the
    /// polynomial's validity box.
    pub fn utci(&self, ta: f64, tmrt: f64, wind10: f64, rh: f64) -> UtciValue {
        let ta_c = ta.clamp(TA_RANGE.0, TA_RANGE.1);
        let d = (tmrt - ta_c).clamp(DELTA_TMRT_RANGE.0, DELTA_TMRT_RANGE.1);
        let va = wind10.clamp(WIND_RANGE.0, WIND_RANGE.1);
        let clamped = ta_c != ta || d != tmrt - ta_c || va != wind10;
        let pa = vapor_pressure_hpa(ta_c, rh.clamp(0.0, 100.0)) / 10.0;
        UtciValue {
            value: self.evaluate(ta_c, va, d, pa),
            clamped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtciValue {
    pub value: f64,
    /// True when any input was moved into the validity box.
    pub clamped: bool,
}

/// Magnus formula over water, hPa.
pub fn vapor_pressure_hpa(ta: f64, rh: f64) -> f64 {
    6.1094 * (17.625 * ta / (ta + 243.04)).exp() * rh / 100.0
}

/// UTCI using the embedded coefficient table.
pub fn utci(ta: f64, tmrt: f64, wind10: f64, rh: f64) -> UtciValue {
    UtciPolynomial::embedded().utci(ta, tmrt, wind10, rh)
}

/// Cellwise UTCI over a Tmrt grid with scalar meteorology. Returns the grid
/// and the number of cells whose inputs were clamped.
pub fn utci_grid(tmrt: &Grid, ta: f64, wind10: f64, rh: f64) -> (Grid, usize) {
    let poly = UtciPolynomial::embedded();
    let nodata = tmrt.nodata();
    let clamped = std::sync::atomic::AtomicUsize::new(0);
    let g = tmrt.map_cells(|r, c| match tmrt.value(r, c) {
        Some(t) => {
            let u = poly.utci(ta, t, wind10, rh);
            if u.clamped {
                clamped.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
            u.value
        }
        None => nodata,
    });
    (g, clamped.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UtciCategory {
    ExtremeCold,
    VeryStrongCold,
    StrongCold,
    ModerateCold,
    SlightCold,
    NoStress,
    ModerateHeat,
    StrongHeat,
    VeryStrongHeat,
    ExtremeHeat,
}

impl UtciCategory {
    pub fn label(self) -> &'static str {
        match self {
            UtciCategory::ExtremeCold => "extreme cold stress",
            UtciCategory::VeryStrongCold => "very strong cold stress",
            UtciCategory::StrongCold => "strong cold stress",
            UtciCategory::ModerateCold => "moderate cold stress",
            UtciCategory::SlightCold => "slight cold stress",
            UtciCategory::NoStress => "no thermal stress",
            UtciCategory::ModerateHeat => "moderate heat stress",
            UtciCategory::StrongHeat => "strong heat stress",
            UtciCategory::VeryStrongHeat => "very strong heat stress",
            UtciCategory::ExtremeHeat => "extreme heat stress",
        }
    }
}

impl fmt::Display for UtciCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Stress band of a UTCI value. Bands are closed on the left, so 38 °C is
/// already "very strong heat stress".
pub fn utci_category(u: f64) -> UtciCategory {
    use UtciCategory::*;
    const BANDS: [(f64, UtciCategory); 9] = [
        (-40.0, ExtremeCold),
        (-27.0, VeryStrongCold),
        (-13.0, StrongCold),
        (0.0, ModerateCold),
        (9.0, SlightCold),
        (26.0, NoStress),
        (32.0, ModerateHeat),
        (38.0, StrongHeat),
        (46.0, VeryStrongHeat),
    ];
    for (upper, cat) in BANDS {
        if u < upper {
            return cat;
        }
    }
    ExtremeHeat
}
