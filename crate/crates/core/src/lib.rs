//! Urban heat-stress analysis toolkit.
//!
//! The crate covers the full chain from rasters to explanations:
//!
//! * [`raster`]: georeferenced grids, zone polygons, distance transform, resampling
//! * [`indices`]: spectral covariates (NDVI, NDBI, WET, albedo)
//! * [`morphology`]: ray-cast sky view factor and per-zone 3D morphometrics
//! * [`microclimate`] and [`utci`]: sun position, shadows, six-directional
//!   radiation, mean radiant temperature and the operational UTCI polynomial
//! * [`landscape`]: patch labelling and landscape pattern metrics
//! * [`zonal`]: zonal aggregation and LST/UTCI comparison analytics
//! * [`spatial`]: contiguity weights, global Moran's I and LISA
//! * [`gwr`]: geographically weighted linear regression
//! * [`boost`]: weighted gradient-boosted regression trees
//! * [`gwboost`]: geographically weighted boosting
//! * [`explain`] and [`gam`]: TreeSHAP, Shapley oracle, penalised spline smoothers
//! * [`pipeline`]: configuration-driven orchestration and a synthetic city

pub mod boost;
pub mod error;
pub mod explain;
pub mod gam;
pub mod gwboost;
pub mod gwr;
pub mod indices;
pub mod landscape;
pub mod microclimate;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod spatial;
pub mod stats;
pub mod table;
pub mod utci;
pub mod zonal;

pub use error::{Error, Result};
pub use raster::{Grid, ZoneSet};
pub use table::FeatureTable;
