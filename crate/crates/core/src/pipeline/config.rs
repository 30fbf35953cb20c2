use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::{FitConfig, FitGrid};
use crate::error::{Error, Result};
use crate::landscape::{Connectivity, Metric};
use crate::morphology::SvfConfig;
use crate::spatial::WeightScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub dsm: PathBuf,
    pub dem: PathBuf,
    pub cdsm: PathBuf,
    pub landcover: PathBuf,
    pub bands: PathBuf,
    pub lst: PathBuf,
    pub zones: PathBuf,
    pub meteo: PathBuf,
    #[serde(default)]
    pub socio: Option<PathBuf>,
}

impl Inputs {
    /// (name, path) for every configured input.
    pub fn named(&self) -> Vec<(&'static str, &Path)> {
        let mut v: Vec<(&'static str, &Path)> = vec![
            ("dsm", &self.dsm),
            ("dem", &self.dem),
            ("cdsm", &self.cdsm),
            ("landcover", &self.landcover),
            ("bands", &self.bands),
            ("lst", &self.lst),
            ("zones", &self.zones),
            ("meteo", &self.meteo),
        ];
        if let Some(s) = &self.socio {
            v.push(("socio", s));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Site {
    pub latitude: f64,
    pub longitude: f64,
    pub utc_offset: i32,
}

impl Default for Site {
    fn default() -> Self {
        Site { latitude: 1.35, longitude: 103.8, utc_offset: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtciParams {
    /// Local clock hour whose samples are averaged.
    pub hour: u32,
}

impl Default for UtciParams {
    fn default() -> Self {
        UtciParams { hour: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandcoverParams {
    /// Land-cover code of buildings; their cells are masked from UTCI and
    /// SVF zone means.
    pub building_class: Option<i64>,
    /// Land-cover code of open water, the target of the D_sea distance.
    pub water_class: Option<i64>,
    pub connectivity: u32,
    /// Classes for which class-level metrics become features.
    pub metric_classes: Vec<i64>,
    pub floor_height: f64,
}

impl Default for LandcoverParams {
    fn default() -> Self {
        LandcoverParams {
            building_class: Some(1),
            water_class: Some(5),
            connectivity: 8,
            metric_classes: vec![2],
            floor_height: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonParams {
    pub bins: usize,
    pub lowess_frac: f64,
}

impl Default for ComparisonParams {
    fn default() -> Self {
        ComparisonParams { bins: 10, lowess_frac: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialParams {
    pub weights: String,
    pub permutations: usize,
    pub alpha: f64,
}

impl Default for SpatialParams {
    fn default() -> Self {
        SpatialParams { weights: "queen_nn_hybrid".into(), permutations: 999, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub targets: Vec<String>,
    /// Feature columns; empty means every derived and joined feature.
    pub features: Vec<String>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    /// Base hyperparameters (its seed is replaced by one derived from the
    /// global seed).
    pub base: FitConfig,
    pub grid: FitGrid,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            targets: vec!["lst_mean".into(), "utci_mean".into()],
            features: Vec::new(),
            outer_folds: 5,
            inner_folds: 5,
            base: FitConfig::default(),
            grid: FitGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GwrParams {
    /// Adaptive neighbour counts; empty means the gw-boost candidates plus n.
    pub candidates: Vec<usize>,
    /// Predictors for the linear baseline; empty means the model features.
    pub features: Vec<String>,
}

impl Default for GwrParams {
    fn default() -> Self {
        GwrParams { candidates: Vec::new(), features: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GwBoostParams {
    pub candidates: Vec<usize>,
    pub residual_permutations: usize,
}

impl Default for GwBoostParams {
    fn default() -> Self {
        GwBoostParams { candidates: vec![30, 50, 70, 94, 120], residual_permutations: 999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainParams {
    pub n_knots: usize,
    /// Number of top-ranked features that get dependence curves.
    pub dependence_features: usize,
    /// Feature used to colour dependence exports and exported as signed
    /// SHAP in the local maps.
    pub color_feature: String,
    pub curve_points: usize,
}

impl Default for ExplainParams {
    fn default() -> Self {
        ExplainParams { n_knots: 8, dependence_features: 5, color_feature: "SVF".into(), curve_points: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub inputs: Inputs,
    #[serde(default)]
    pub site: Site,
    #[serde(default)]
    pub svf: SvfConfig,
    #[serde(default)]
    pub utci: UtciParams,
    #[serde(default)]
    pub landcover: LandcoverParams,
    #[serde(default)]
    pub comparison: ComparisonParams,
    #[serde(default)]
    pub spatial: SpatialParams,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub gwr: GwrParams,
    #[serde(default)]
    pub gwboost: GwBoostParams,
    #[serde(default)]
    pub explain: ExplainParams,
}

/// Rewrites serde's field errors into "missing key: x" / "unknown key: x".
fn key_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let quoted = |prefix: &str| {
        msg.strip_prefix(prefix)
            .and_then(|r| r.strip_prefix('`'))
            .and_then(|r| r.split('`').next())
            .map(str::to_string)
    };
    if let Some(k) = quoted("missing field ") {
        Error::Config(format!("missing key: {k}"))
    } else if let Some(k) = quoted("unknown field ") {
        Error::Config(format!("unknown key: {k}"))
    } else {
        Error::Config(e.to_string())
    }
}

/// Deserialises TOML, reporting field problems as "missing key: x" or
/// "unknown key: x".
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(key_error)
}

impl PipelineConfig {
    /// Parses TOML text; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = parse_toml(text)?;
        cfg.resolve_paths(base_dir);
        cfg.check_parameters()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let i = &mut self.inputs;
        for p in [&mut i.dsm, &mut i.dem, &mut i.cdsm, &mut i.landcover, &mut i.bands, &mut i.lst, &mut i.zones, &mut i.meteo] {
            fix(p);
        }
        if let Some(s) = i.socio.as_mut() {
            fix(s);
        }
    }

    pub fn weight_scheme(&self) -> Result<WeightScheme> {
        self.spatial.weights.parse()
    }

    pub fn connectivity(&self) -> Result<Connectivity> {
        Connectivity::from_count(self.landcover.connectivity)
    }

    pub fn landscape_metrics() -> Vec<Metric> {
        Metric::ALL.to_vec()
    }

    fn check_parameters(&self) -> Result<()> {
        self.svf.validate()?;
        self.model.base.validate()?;
        self.weight_scheme().map_err(|e| Error::Config(e.to_string()))?;
        self.connectivity().map_err(|e| Error::Config(e.to_string()))?;
        if self.utci.hour > 23 {
            return Err(Error::Config(format!("utci.hour must lie in 0..=23, got {}", self.utci.hour)));
        }
        if self.model.targets.is_empty() {
            return Err(Error::Config("model.targets is empty".into()));
        }
        if self.model.outer_folds < 2 || self.model.inner_folds < 2 {
            return Err(Error::Config("fold counts must be >= 2".into()));
        }
        if self.gwboost.candidates.is_empty() {
            return Err(Error::Config("gwboost.candidates is empty".into()));
        }
        if self.explain.n_knots < 2 {
            return Err(Error::Config("explain.n_knots must be >= 2".into()));
        }
        if !(self.landcover.floor_height > 0.0) {
            return Err(Error::Config("landcover.floor_height must be positive".into()));
        }
        if !(self.spatial.alpha > 0.0 && self.spatial.alpha < 1.0) {
            return Err(Error::Config("spatial.alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Fails if any referenced input file is absent.
    pub fn check_inputs_exist(&self) -> Result<()> {
        for (name, p) in self.inputs.named() {
            if !p.is_file() {
                return Err(Error::Validation(format!("input '{name}' not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

/// Reads, parses and validates a pipeline configuration file, including the
/// existence of every input.
pub fn validate_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = PipelineConfig::from_toml_str(&text, base)?;
    cfg.check_inputs_exist()?;
    Ok(cfg)
}
