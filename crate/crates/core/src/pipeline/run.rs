use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boost::{fit, nested_cv, BoostedModel, FitConfig};
use crate::error::{Error, Result};
use crate::explain::{dependence_rows, local_importance_maps, shap_summary, tree_shap};
use crate::gam::{gam_fit, transition_point, Smoothing};
use crate::gwboost::{global_oob, gw_fit, loo_bandwidth, residual_moran, LocalKernel};
use crate::gwr::{gwr_bandwidth_search, gwr_fit, ols, predict_linear, KernelSpec};
use crate::indices::{compute_index, BandStack, IndexKind};
use crate::landscape::{find_value, zone_metrics, Metric};
use crate::microclimate::{mean_utci, read_meteo_csv, samples_at_local_hour, BodyConstants, Scene};
use crate::morphology::{compute_svf, zone_morphometrics, MORPHOMETRIC_COLUMNS};
use crate::raster::{distance_to_mask, rasterize_zones, read_grid_auto, write_grid, Grid, GridFormat, ZoneSet};
use crate::rng::derive_seed_str;
use crate::spatial::{build_weights, global_moran, lisa, SpatialWeights};
use crate::stats::{quantile_sorted, sort_f64, Metrics};
use crate::table::{fmt_value, FeatureTable};
use crate::zonal::{binned_median_iqr, bivariate_class, lowess, standardized_mismatch, zonal_stats};

use super::config::PipelineConfig;

/// Accumulates rows and renders RFC 4180 CSV.
struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Csv { w }
    }

    fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.w.write_record(fields.iter().map(|f| f.as_ref())).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_value)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub zones: usize,
    pub model_rows: usize,
    pub features: Vec<String>,
    pub dropped_features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
}

struct Outputs {
    root: PathBuf,
    written: BTreeMap<String, FileRecord>,
}

impl Outputs {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.insert(
            rel.to_string(),
            FileRecord { file: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 },
        );
        Ok(())
    }

    fn grid(&mut self, rel: &str, g: &Grid) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
        }
        write_grid(g, &path, GridFormat::EsriAscii)?;
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.written.insert(
            rel.to_string(),
            FileRecord { file: rel.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 },
        );
        Ok(())
    }
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage { stage: name.to_string(), source: Box::new(e) })
}

fn class_mask(landcover: &Grid, class: i64) -> Grid {
    landcover.map_cells(|r, c| match landcover.value(r, c) {
        Some(v) if v as i64 == class => 1.0,
        Some(_) => 0.0,
        None => landcover.nodata(),
    })
}

fn zone_means(grid: &Grid, zr: &Grid, masks: &[&Grid]) -> Result<HashMap<i64, f64>> {
    Ok(zonal_stats(grid, zr, masks)?.into_iter().map(|(z, s)| (z, s.mean)).collect())
}

/// Files referenced by a bands manifest, keyed by band name.
fn band_files(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(map.into_iter().map(|(k, v)| (format!("bands/{k}"), base.join(v))).collect())
}

struct Prepared {
    table: FeatureTable,
    zones: ZoneSet,
    features: Vec<String>,
    dropped: Vec<String>,
    rows: Vec<usize>,
}

/// Feature columns with missing values imputed by the column median over
/// the modelling rows; all-missing and constant columns are dropped.
fn prepare_features(table: &FeatureTable, zones: &ZoneSet, cfg: &PipelineConfig) -> Result<Prepared> {
    let targets = &cfg.model.targets;
    for t in targets {
        table.column(t)?;
    }
    let rows = table.complete_rows(targets)?;
    if rows.len() < 2 * cfg.model.outer_folds.max(10) {
        return Err(Error::Validation(format!("only {} zones have every target", rows.len())));
    }
    let candidates: Vec<String> = if cfg.model.features.is_empty() {
        table.names().iter().filter(|n| !targets.contains(n)).cloned().collect()
    } else {
        for f in &cfg.model.features {
            table.column(f)?;
        }
        cfg.model.features.clone()
    };
    let ids: Vec<i64> = rows.iter().map(|&r| table.zone_ids()[r]).collect();
    let cents: Vec<(f64, f64)> = rows.iter().map(|&r| table.centroids()[r]).collect();
    let mut out = FeatureTable::new(ids.clone(), cents)?;
    let mut features = Vec::new();
    let mut dropped = Vec::new();
    for name in &candidates {
        let col = table.column(name)?;
        let vals: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        let mut finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            dropped.push(name.clone());
            continue;
        }
        sort_f64(&mut finite);
        let med = quantile_sorted(&finite, 0.5);
        let filled: Vec<f64> = vals.iter().map(|&v| if v.is_finite() { v } else { med }).collect();
        if filled.iter().all(|&v| v == filled[0]) {
            dropped.push(name.clone());
            continue;
        }
        out.set_column(name, filled)?;
        features.push(name.clone());
    }
    if features.is_empty() {
        return Err(Error::Validation("no usable feature columns".into()));
    }
    for t in targets {
        let col = table.column(t)?;
        out.set_column(t, rows.iter().map(|&r| col[r]).collect())?;
    }
    let keep: std::collections::HashSet<i64> = ids.into_iter().collect();
    let zones = ZoneSet::new(zones.zones.iter().filter(|z| keep.contains(&z.id)).cloned().collect())?;
    let rows = (0..out.len()).collect();
    Ok(Prepared { table: out, zones, features, dropped, rows })
}

fn write_model(out: &mut Outputs, rel: &str, m: &BoostedModel) -> Result<()> {
    out.write(rel, m.to_json().as_bytes())
}

/// Runs every stage in order, writing into `<output_dir>.partial` and
/// renaming to `output_dir` on success. On failure the partial directory is
/// left in place and the error names the failing stage.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    stage("validate", || cfg.check_inputs_exist())?;
    let final_dir = cfg.output_dir.clone();
    let mut partial = final_dir.clone().into_os_string();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    if partial.exists() {
        std::fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    }
    std::fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
    let mut out = Outputs { root: partial.clone(), written: BTreeMap::new() };
    let seed = cfg.seed;
    let inp = &cfg.inputs;

    // features
    let (dsm, cdsm, landcover, albedo, zone_raster, zones, mut table, building_mask) = stage("features", || {
        let dsm = read_grid_auto(&inp.dsm)?;
        let dem = read_grid_auto(&inp.dem)?;
        let cdsm = read_grid_auto(&inp.cdsm)?;
        let landcover = read_grid_auto(&inp.landcover)?;
        dsm.ensure_aligned(&dem, "dem vs dsm")?;
        dsm.ensure_aligned(&cdsm, "cdsm vs dsm")?;
        dsm.ensure_aligned(&landcover, "landcover vs dsm")?;
        let bands = BandStack::from_manifest(&inp.bands)?;
        let mut idx = BTreeMap::new();
        for (name, kind) in [("NDVI", IndexKind::Ndvi), ("NDBI", IndexKind::Ndbi), ("WET", IndexKind::Wet), ("Albedo", IndexKind::Albedo)] {
            let g = compute_index(kind, &bands)?;
            dsm.ensure_aligned(&g, "bands vs dsm")?;
            idx.insert(name, g);
        }
        let building_mask = cfg.landcover.building_class.map(|b| class_mask(&landcover, b));
        let bh = dsm.map_cells(|r, c| match (dsm.value(r, c), dem.value(r, c)) {
            (Some(s), Some(g)) => {
                let is_building = building_mask.as_ref().is_none_or(|m| m.get(r, c) == 1.0);
                if is_building {
                    (s - g).max(0.0)
                } else {
                    0.0
                }
            }
            _ => dsm.nodata(),
        });
        let zones = ZoneSet::read(&inp.zones)?;
        let zr = rasterize_zones(&zones, &dsm)?;
        let mut table = FeatureTable::new(zones.ids(), zones.centroids())?;
        for (name, g) in &idx {
            table.set_column_by_zone(name, &zone_means(g, &zr, &[])?)?;
        }
        table.set_column_by_zone("DEM", &zone_means(&dem, &zr, &[])?)?;
        if let Some(w) = cfg.landcover.water_class {
            let mask = class_mask(&landcover, w);
            if mask.values().iter().any(|&v| v == 1.0) {
                table.set_column_by_zone("D_sea", &zone_means(&distance_to_mask(&mask)?, &zr, &[])?)?;
            }
        }
        let morph = zone_morphometrics(&bh, &cdsm, &zr, cfg.landcover.floor_height)?;
        for (k, name) in MORPHOMETRIC_COLUMNS.iter().enumerate() {
            let m: HashMap<i64, f64> = morph.iter().map(|(z, v)| (*z, v[k])).collect();
            table.set_column_by_zone(name, &m)?;
        }
        let lm = zone_metrics(&landcover, &zr, cfg.connectivity()?, &Metric::ALL)?;
        for metric in Metric::ALL.into_iter().filter(|m| m.has_landscape_level()) {
            let m: HashMap<i64, f64> = lm.iter().map(|(z, v)| (*z, find_value(v, metric, None).unwrap_or(f64::NAN))).collect();
            table.set_column_by_zone(metric.name(), &m)?;
        }
        for &class in &cfg.landcover.metric_classes {
            for metric in [Metric::Pland, Metric::Cohesion, Metric::Pafrac, Metric::ContigAm] {
                let m: HashMap<i64, f64> =
                    lm.iter().map(|(z, v)| (*z, find_value(v, metric, Some(class)).unwrap_or(f64::NAN))).collect();
                table.set_column_by_zone(&format!("{}_c{class}", metric.name()), &m)?;
            }
        }
        if let Some(s) = &inp.socio {
            table.join(&FeatureTable::read_csv(s)?)?;
        }
        let albedo = idx.remove("Albedo").expect("albedo computed");
        Ok((dsm, cdsm, landcover, albedo, zr, zones, table, building_mask))
    })?;
    let _ = &landcover;

    // svf
    let svf = stage("svf", || {
        let svf = compute_svf(&dsm, Some(&cdsm), &cfg.svf)?;
        out.grid("rasters/svf.asc", &svf)?;
        let masks: Vec<&Grid> = building_mask.iter().collect();
        table.set_column_by_zone("SVF", &zone_means(&svf, &zone_raster, &masks)?)?;
        Ok(svf)
    })?;

    // utci
    let utci = stage("utci", || {
        let samples = read_meteo_csv(&inp.meteo)?;
        let picked = samples_at_local_hour(&samples, cfg.utci.hour, cfg.site.utc_offset);
        let scene = Scene {
            dsm: &dsm,
            cdsm: Some(&cdsm),
            svf: &svf,
            albedo: &albedo,
            lat: cfg.site.latitude,
            lon: cfg.site.longitude,
            tau: cfg.svf.canopy_transmissivity,
        };
        let (u, _) = mean_utci(&scene, &picked, &BodyConstants::default())?;
        out.grid("rasters/utci.asc", &u)?;
        Ok(u)
    })?;

    // zonal tables and comparison analytics
    stage("zonal", || {
        let lst = read_grid_auto(&inp.lst)?;
        dsm.ensure_aligned(&lst, "lst vs dsm")?;
        let masks: Vec<&Grid> = building_mask.iter().collect();
        table.set_column_by_zone("lst_mean", &zone_means(&lst, &zone_raster, &[])?)?;
        table.set_column_by_zone("utci_mean", &zone_means(&utci, &zone_raster, &masks)?)?;
        out.write("features.csv", table.to_csv_string().as_bytes())?;
        let l = table.column("lst_mean")?.to_vec();
        let u = table.column("utci_mean")?.to_vec();
        let both: Vec<usize> = (0..table.len()).filter(|&i| l[i].is_finite() && u[i].is_finite()).collect();
        let lb: Vec<f64> = both.iter().map(|&i| l[i]).collect();
        let ub: Vec<f64> = both.iter().map(|&i| u[i]).collect();
        let z = standardized_mismatch(&lb, &ub)?;
        let bc = bivariate_class(&lb, &ub)?;
        let mut pos = HashMap::new();
        for (k, &i) in both.iter().enumerate() {
            pos.insert(i, k);
        }
        let mut csv = Csv::new(&["zone_id", "lst_mean", "utci_mean", "z_mismatch", "biv_class", "biv_label"]);
        for (i, zid) in table.zone_ids().iter().enumerate() {
            let k = pos.get(&i);
            let cls = k.and_then(|&k| bc[k]);
            csv.row(&[
                zid.to_string(),
                fmt_value(l[i]),
                fmt_value(u[i]),
                opt(k.map(|&k| z[k])),
                cls.map_or("NA".into(), |c| c.code()),
                cls.map_or("NA".into(), |c| c.label().to_string()),
            ]);
        }
        out.write("comparison.csv", &csv.finish())?;
        let bins = binned_median_iqr(&lb, &ub, cfg.comparison.bins)?;
        let mut csv = Csv::new(&["bin_lo", "bin_hi", "count", "median", "q25", "q75"]);
        for b in bins {
            csv.row(&[fmt_value(b.lo), fmt_value(b.hi), b.count.to_string(), fmt_value(b.median), fmt_value(b.q25), fmt_value(b.q75)]);
        }
        out.write("curves_binned.csv", &csv.finish())?;
        let fitted = lowess(&lb, &ub, cfg.comparison.lowess_frac, 2)?;
        let mut csv = Csv::new(&["zone_id", "lst_mean", "utci_mean", "lowess"]);
        for (k, &i) in both.iter().enumerate() {
            csv.row(&[table.zone_ids()[i].to_string(), fmt_value(lb[k]), fmt_value(ub[k]), fmt_value(fitted[k])]);
        }
        out.write("curves_lowess.csv", &csv.finish())?;
        Ok(())
    })?;

    let prep = stage("prepare", || prepare_features(&table, &zones, cfg))?;
    let n = prep.table.len();
    let coords: Vec<(f64, f64)> = prep.table.centroids().to_vec();
    let ids: Vec<i64> = prep.table.zone_ids().to_vec();
    let x = prep.table.matrix(&prep.features, &prep.rows)?;
    let targets = cfg.model.targets.clone();
    let ys: Vec<Vec<f64>> = targets.iter().map(|t| prep.table.column(t).map(|c| c.to_vec())).collect::<Result<_>>()?;

    // global and local spatial autocorrelation
    let weights: SpatialWeights = stage("spatial", || {
        let w = build_weights(&prep.zones, cfg.weight_scheme()?, true)?;
        let mut mcsv = Csv::new(&["target", "moran_i", "expected", "p_value"]);
        let mut lcsv = Csv::new(&["zone_id", "target", "local_i", "z", "lag", "p_value", "category"]);
        for (t, y) in targets.iter().zip(&ys) {
            let m = global_moran(y, &w, cfg.spatial.permutations, derive_seed_str(seed, &format!("moran:{t}")))?;
            mcsv.row(&[t.clone(), fmt_value(m.i), fmt_value(m.expected), fmt_value(m.p_value)]);
            let l = lisa(y, &w, cfg.spatial.permutations, derive_seed_str(seed, &format!("lisa:{t}")), cfg.spatial.alpha)?;
            for (zid, v) in ids.iter().zip(&l) {
                lcsv.row(&[
                    zid.to_string(),
                    t.clone(),
                    fmt_value(v.local_i),
                    fmt_value(v.z),
                    fmt_value(v.lag),
                    fmt_value(v.p_value),
                    v.category.code().to_string(),
                ]);
            }
        }
        out.write("moran.csv", &mcsv.finish())?;
        out.write("lisa.csv", &lcsv.finish())?;
        Ok(w)
    })?;

    // linear geographically weighted baseline
    stage("gwr", || {
        let names = if cfg.gwr.features.is_empty() { prep.features.clone() } else { cfg.gwr.features.clone() };
        let xg = prep.table.matrix(&names, &prep.rows)?;
        let mut ks: Vec<usize> = if cfg.gwr.candidates.is_empty() {
            cfg.gwboost.candidates.iter().copied().chain(std::iter::once(n)).collect()
        } else {
            cfg.gwr.candidates.clone()
        };
        ks.retain(|&k| k >= names.len() + 2 && k <= n);
        ks.sort_unstable();
        ks.dedup();
        let kernels: Vec<KernelSpec> = ks.into_iter().map(KernelSpec::Adaptive).collect();
        let mut bcsv = Csv::new(&["target", "kernel", "aicc"]);
        let mut scsv = Csv::new(&["target", "kernel", "aicc", "rmse_gwr", "rmse_ols"]);
        let mut fcsv = Csv::new(&["zone_id", "target", "fitted", "residual", "local_r2"]);
        for (t, y) in targets.iter().zip(&ys) {
            let (best, trace) = gwr_bandwidth_search(&xg, y, &coords, &kernels)?;
            for tr in &trace {
                bcsv.row(&[t.clone(), tr.kernel.to_string(), opt(tr.aicc)]);
            }
            let f = gwr_fit(&xg, y, &coords, best)?;
            let beta = ols(&xg, y)?;
            let pred: Vec<f64> = xg.iter().map(|r| predict_linear(&beta, r)).collect();
            scsv.row(&[
                t.clone(),
                best.to_string(),
                fmt_value(f.aicc),
                fmt_value(Metrics::compute(y, &f.fitted).rmse),
                fmt_value(Metrics::compute(y, &pred).rmse),
            ]);
            for i in 0..n {
                fcsv.row(&[ids[i].to_string(), t.clone(), fmt_value(f.fitted[i]), fmt_value(f.residuals[i]), fmt_value(f.local_r2[i])]);
            }
        }
        out.write("gwr_bandwidth.csv", &bcsv.finish())?;
        out.write("gwr_summary.csv", &scsv.finish())?;
        out.write("gwr.csv", &fcsv.finish())?;
        Ok(())
    })?;

    // global nested cross-validation and the global model per target
    let globals: Vec<(FitConfig, BoostedModel, Vec<f64>)> = stage("nested_cv", || {
        let mut csv = Csv::new(&[
            "target", "n_estimators", "learning_rate", "max_depth", "subsample", "r2_mean", "r2_sd", "mae_mean", "mae_sd",
            "rmse_mean", "rmse_sd", "fold_winners",
        ]);
        let mut res = Vec::new();
        for (t, y) in targets.iter().zip(&ys) {
            let base = FitConfig { seed: derive_seed_str(seed, &format!("fit:{t}")), ..cfg.model.base };
            let grid = cfg.model.grid.expand(&base);
            let cv = nested_cv(&x, y, &prep.features, &grid, cfg.model.outer_folds, cfg.model.inner_folds, derive_seed_str(seed, &format!("cv:{t}")))?;
            let b = cv.best;
            csv.row(&[
                t.clone(),
                b.n_estimators.to_string(),
                fmt_value(b.learning_rate),
                b.max_depth.to_string(),
                fmt_value(b.subsample),
                fmt_value(cv.mean.r2),
                fmt_value(cv.sd.r2),
                fmt_value(cv.mean.mae),
                fmt_value(cv.sd.mae),
                fmt_value(cv.mean.rmse),
                fmt_value(cv.sd.rmse),
                cv.winners.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(";"),
            ]);
            let model = fit(&x, y, &vec![1.0; n], &prep.features, &b)?.model;
            write_model(&mut out, &format!("models/{t}/global.json"), &model)?;
            let pred = model.predict(&x)?;
            let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, p)| a - p).collect();
            res.push((b, model, resid));
        }
        out.write("cv.csv", &csv.finish())?;
        Ok(res)
    })?;

    // geographically weighted boosting
    let local_sets = stage("gwboost", || {
        let mut tcsv = Csv::new(&["target", "k", "loo_rmse"]);
        let mut rcsv = Csv::new(&["zone_id", "target", "local_r2", "prediction"]);
        let mut scsv = Csv::new(&["zone_id", "target", "residual", "std_residual"]);
        let mut gcsv = Csv::new(&[
            "target", "k", "oob_r2", "oob_mae", "oob_rmse", "residual_moran_local", "p_local", "residual_moran_global", "p_global",
        ]);
        let mut sets = Vec::new();
        for ((t, y), (best_cfg, _, gresid)) in targets.iter().zip(&ys).zip(&globals) {
            let mut cands: Vec<usize> = cfg.gwboost.candidates.clone();
            cands.sort_unstable();
            cands.dedup();
            let usable: Vec<usize> = cands.iter().copied().filter(|&k| (10..n).contains(&k)).collect();
            if usable.is_empty() {
                return Err(Error::Validation(format!("no gwboost candidate lies in [10, {})", n)));
            }
            let sel = loo_bandwidth(&x, y, &coords, &ids, &prep.features, &usable, best_cfg)?;
            for &k in &cands {
                let r = sel.trace.iter().find(|e| e.0 == k).and_then(|e| e.1);
                tcsv.row(&[t.clone(), k.to_string(), opt(r)]);
            }
            let set = gw_fit(&x, y, &coords, &ids, &prep.features, LocalKernel::Adaptive(sel.best_k), best_cfg)?;
            for (i, m) in set.models.iter().enumerate() {
                rcsv.row(&[m.zone_id.to_string(), t.clone(), fmt_value(m.local_r2), fmt_value(m.prediction)]);
                scsv.row(&[m.zone_id.to_string(), t.clone(), fmt_value(set.residuals[i]), fmt_value(set.std_residuals[i])]);
                write_model(&mut out, &format!("models/{t}/zone_{}.json", m.zone_id), &m.model)?;
            }
            let oob = if best_cfg.subsample < 1.0 { Some(global_oob(&set, y)?) } else { None };
            let perms = cfg.gwboost.residual_permutations;
            let ml = residual_moran(&set, &weights, perms, derive_seed_str(seed, &format!("resid-local:{t}")))?;
            let mg = global_moran(gresid, &weights, perms, derive_seed_str(seed, &format!("resid-global:{t}")))?;
            gcsv.row(&[
                t.clone(),
                sel.best_k.to_string(),
                opt(oob.map(|m| m.r2)),
                opt(oob.map(|m| m.mae)),
                opt(oob.map(|m| m.rmse)),
                fmt_value(ml.i),
                fmt_value(ml.p_value),
                fmt_value(mg.i),
                fmt_value(mg.p_value),
            ]);
            sets.push(set);
        }
        out.write("bandwidth_trace.csv", &tcsv.finish())?;
        out.write("local_r2.csv", &rcsv.finish())?;
        out.write("std_residuals.csv", &scsv.finish())?;
        out.write("gwboost_summary.csv", &gcsv.finish())?;
        Ok(sets)
    })?;

    // SHAP rankings, dependence exports and local primary-feature maps
    let shap_tops = stage("shap", || {
        let color = prep.features.iter().any(|f| *f == cfg.explain.color_feature).then_some(cfg.explain.color_feature.as_str());
        let mut sum_csv = Csv::new(&["target", "rank", "feature", "mean_abs_shap"]);
        let mut dep: BTreeMap<String, Csv> = BTreeMap::new();
        let mut lcsv = Csv::new(&["zone_id", "target", "primary_gain_feature", "primary_shap_feature", "signed_shap_feature", "signed_shap"]);
        let mut tops = Vec::new();
        for ((t, (_, model, _)), set) in targets.iter().zip(&globals).zip(&local_sets) {
            let shap = tree_shap(model, &x)?;
            let ranking = shap_summary(&shap);
            for (r, (f, v)) in ranking.iter().enumerate() {
                sum_csv.row(&[t.clone(), (r + 1).to_string(), f.clone(), fmt_value(*v)]);
            }
            let top: Vec<String> = ranking.iter().take(cfg.explain.dependence_features).map(|r| r.0.clone()).collect();
            for f in &top {
                let rows = dependence_rows(&shap, &x, f, color)?;
                let c = dep.entry(f.clone()).or_insert_with(|| {
                    let cname = format!("color_{}", color.unwrap_or("none"));
                    Csv::new(&["zone_id", "target", "value", "shap", cname.as_str()])
                });
                for (zid, (v, p, col)) in ids.iter().zip(rows) {
                    c.row(&[zid.to_string(), t.clone(), fmt_value(v), fmt_value(p), opt(col)]);
                }
            }
            let local = local_importance_maps(set, &prep.table, color)?;
            for l in local {
                lcsv.row(&[
                    l.zone_id.to_string(),
                    t.clone(),
                    l.primary_gain_feature.unwrap_or_else(|| "NA".into()),
                    l.primary_shap_feature.unwrap_or_else(|| "NA".into()),
                    color.unwrap_or("NA").to_string(),
                    opt(l.signed_shap),
                ]);
            }
            tops.push((shap, top));
        }
        out.write("shap_summary.csv", &sum_csv.finish())?;
        for (f, c) in dep {
            out.write(&format!("shap_dependence_{f}.csv"), &c.finish())?;
        }
        out.write("local_primary.csv", &lcsv.finish())?;
        Ok(tops)
    })?;

    // GAM smoothers and transition points
    stage("gam", || {
        let mut tcsv = Csv::new(&["target", "feature", "transition", "lambda", "edf"]);
        let mut ccsv = Csv::new(&["target", "feature", "x", "fitted"]);
        for (t, (shap, top)) in targets.iter().zip(&shap_tops) {
            for f in top {
                let j = shap.feature_names.iter().position(|n| n == f).expect("ranked feature exists");
                let xv: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let pv: Vec<f64> = shap.values.iter().map(|r| r[j]).collect();
                let g = gam_fit(&xv, &pv, cfg.explain.n_knots, Smoothing::Gcv)?;
                tcsv.row(&[t.clone(), f.clone(), opt(transition_point(&g)), fmt_value(g.lambda), fmt_value(g.edf)]);
                let (lo, hi) = g.range;
                let m = cfg.explain.curve_points.max(2);
                for k in 0..m {
                    let xv = lo + (hi - lo) * k as f64 / (m - 1) as f64;
                    ccsv.row(&[t.clone(), f.clone(), fmt_value(xv), fmt_value(g.eval(xv))]);
                }
            }
        }
        out.write("transition_points.csv", &tcsv.finish())?;
        out.write("gam_curves.csv", &ccsv.finish())?;
        Ok(())
    })?;

    // manifest and publish
    let manifest = stage("manifest", || {
        let mut inputs = Vec::new();
        let mut files: Vec<(String, PathBuf)> = inp.named().into_iter().map(|(n, p)| (n.to_string(), p.to_path_buf())).collect();
        files.extend(band_files(&inp.bands)?);
        for (name, p) in files {
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            inputs.push(FileRecord { file: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        let mut params = serde_json::to_value(cfg).map_err(|e| Error::Other(e.to_string()))?;
        if let Some(o) = params.as_object_mut() {
            o.remove("inputs");
            o.remove("output_dir");
        }
        let manifest = Manifest {
            tool: "heatlens".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            parameters: params,
            inputs,
            outputs: out.written.values().cloned().collect(),
            zones: table.len(),
            model_rows: n,
            features: prep.features.clone(),
            dropped_features: prep.dropped.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Other(e.to_string()))?;
        std::fs::write(partial.join("manifest.json"), text).map_err(|e| Error::io(partial.join("manifest.json"), e))?;
        if final_dir.exists() {
            std::fs::remove_dir_all(&final_dir).map_err(|e| Error::io(&final_dir, e))?;
        }
        std::fs::rename(&partial, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
        Ok(manifest)
    })?;

    Ok(RunSummary { output_dir: final_dir, manifest })
}
