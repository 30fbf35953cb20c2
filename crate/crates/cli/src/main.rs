use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatlens_core::boost::{fit, FitConfig};
use heatlens_core::explain::{shap_summary, tree_shap};
use heatlens_core::gwboost::{global_oob, gw_fit, loo_bandwidth, LocalKernel};
use heatlens_core::gwr::{gwr_bandwidth_search, gwr_fit, KernelSpec};
use heatlens_core::indices::{compute_index, BandStack, IndexKind};
use heatlens_core::morphology::{compute_svf, SvfConfig};
use heatlens_core::pipeline::{make_synthetic_city, run_pipeline, validate_config};
use heatlens_core::raster::{rasterize_zones, read_grid_auto, write_grid_auto, Grid};
use heatlens_core::spatial::{build_weights, global_moran, lisa, WeightScheme};
use heatlens_core::table::fmt_value;
use heatlens_core::utci::{utci, utci_category, utci_grid};
use heatlens_core::zonal::zonal_stats;
use heatlens_core::{Error, FeatureTable, Result, ZoneSet};

#[derive(Parser)]
#[command(name = "heatlens", version, about = "Urban heat-stress analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis described by a TOML configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a seeded synthetic city and its run configuration.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute a spectral index (ndvi, ndbi, wet, albedo) from a bands manifest.
    Index {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        bands: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sky view factor from a surface model.
    Svf {
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        cdsm: Option<PathBuf>,
        #[arg(long, default_value_t = 360)]
        directions: usize,
        #[arg(long, default_value_t = 150.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.03)]
        transmissivity: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// UTCI for a single point, or for a Tmrt grid when --tmrt-grid is given.
    Utci {
        #[arg(long)]
        ta: f64,
        #[arg(long)]
        tmrt: Option<f64>,
        #[arg(long)]
        tmrt_grid: Option<PathBuf>,
        #[arg(long)]
        wind: f64,
        #[arg(long)]
        rh: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-zone mean, sd and count of a grid.
    Zonal {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        zones: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Global Moran's I of a table column.
    Moran {
        #[command(flatten)]
        sp: SpatialArgs,
    },
    /// Local Moran (LISA) clusters of a table column.
    Lisa {
        #[command(flatten)]
        sp: SpatialArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geographically weighted regression with adaptive bandwidth search.
    Gwr {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated adaptive neighbour counts.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a boosted tree model and save it as JSON.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geographically weighted boosting with leave-one-out bandwidth choice.
    Gwfit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// TreeSHAP attributions of a saved model over a feature table.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct SpatialArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    column: String,
    #[arg(long)]
    zones: PathBuf,
    #[arg(long, default_value = "queen")]
    weights: String,
    #[arg(long, default_value_t = 999)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct DataArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    target: String,
    /// Comma-separated feature columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
}

struct Data {
    table: FeatureTable,
    names: Vec<String>,
    rows: Vec<usize>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<Data> {
        let table = FeatureTable::read_csv(&self.table)?;
        table.column(&self.target)?;
        let names: Vec<String> = if self.features.is_empty() {
            table.names().iter().filter(|n| **n != self.target).cloned().collect()
        } else {
            self.features.clone()
        };
        let mut needed = names.clone();
        needed.push(self.target.clone());
        let rows = table.complete_rows(&needed)?;
        let x = table.matrix(&names, &rows)?;
        let col = table.column(&self.target)?;
        let y = rows.iter().map(|&r| col[r]).collect();
        Ok(Data { table, names, rows, x, y })
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_fit_config(path: &Option<PathBuf>) -> Result<FitConfig> {
    match path {
        Some(p) => FitConfig::from_toml_str(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => Ok(FitConfig::default()),
    }
}

fn column_with_zones(sp: &SpatialArgs) -> Result<(Vec<f64>, ZoneSet, Vec<i64>)> {
    let table = FeatureTable::read_csv(&sp.table)?;
    let zones = ZoneSet::read(&sp.zones)?;
    let col = table.column(&sp.column)?;
    let by_zone: HashMap<i64, f64> = table.zone_ids().iter().copied().zip(col.iter().copied()).collect();
    let mut x = Vec::with_capacity(zones.len());
    for id in zones.ids() {
        match by_zone.get(&id) {
            Some(v) if v.is_finite() => x.push(*v),
            _ => return Err(Error::Validation(format!("zone {id} has no value for '{}'", sp.column))),
        }
    }
    let ids = zones.ids();
    Ok((x, zones, ids))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline { config } => {
            let cfg = validate_config(&config)?;
            let s = run_pipeline(&cfg).map_err(Runtime::wrap)?;
            println!("wrote {} files to {}", s.manifest.outputs.len() + 1, s.output_dir.display());
        }
        Command::Synth { seed, size, out } => {
            let city = make_synthetic_city(seed, size, &out)?;
            println!("synthetic city written; run with: heatlens pipeline --config {}", city.config_path.display());
        }
        Command::Index { kind, bands, out } => {
            let kind: IndexKind = kind.parse()?;
            let stack = BandStack::from_manifest(&bands)?;
            write_grid_auto(&compute_index(kind, &stack)?, &out)?;
        }
        Command::Svf { dsm, cdsm, directions, radius, transmissivity, out } => {
            let cfg = SvfConfig { directions, search_radius: radius, canopy_transmissivity: transmissivity };
            let dsm = read_grid_auto(&dsm)?;
            let cdsm = cdsm.map(|p| read_grid_auto(&p)).transpose()?;
            write_grid_auto(&compute_svf(&dsm, cdsm.as_ref(), &cfg)?, &out)?;
        }
        Command::Utci { ta, tmrt, tmrt_grid, wind, rh, out } => match (tmrt, tmrt_grid, out) {
            (Some(t), None, None) => {
                let u = utci(ta, t, wind, rh);
                println!("{},{}{}", fmt_value(u.value), utci_category(u.value).label(), if u.clamped { ",clamped" } else { "" });
            }
            (None, Some(g), Some(o)) => {
                let (grid, clamped) = utci_grid(&read_grid_auto(&g)?, ta, wind, rh);
                write_grid_auto(&grid, &o)?;
                if clamped > 0 {
                    eprintln!("warning: {clamped} cells outside the polynomial's validity range were clamped");
                }
            }
            _ => return Err(Error::Validation("give either --tmrt, or --tmrt-grid with --out".into())),
        },
        Command::Zonal { grid, zones, out } => {
            let g: Grid = read_grid_auto(&grid)?;
            let zr = rasterize_zones(&ZoneSet::read(&zones)?, &g)?;
            let mut s = String::from("zone_id,mean,sd,count\n");
            for (z, st) in zonal_stats(&g, &zr, &[])? {
                s.push_str(&format!("{z},{},{},{}\n", fmt_value(st.mean), fmt_value(st.sd), st.count));
            }
            write_text(&out, &s)?;
        }
        Command::Moran { sp } => {
            let (x, zones, _) = column_with_zones(&sp)?;
            let scheme: WeightScheme = sp.weights.parse()?;
            let w = build_weights(&zones, scheme, true)?;
            let m = global_moran(&x, &w, sp.permutations, sp.seed).map_err(Runtime::wrap)?;
            println!("moran_i,expected,p_value\n{},{},{}", fmt_value(m.i), fmt_value(m.expected), fmt_value(m.p_value));
        }
        Command::Lisa { sp, alpha, out } => {
            let (x, zones, ids) = column_with_zones(&sp)?;
            let scheme: WeightScheme = sp.weights.parse()?;
            let w = build_weights(&zones, scheme, true)?;
            let l = lisa(&x, &w, sp.permutations, sp.seed, alpha).map_err(Runtime::wrap)?;
            let mut s = String::from("zone_id,local_i,z,lag,p_value,category\n");
            for (id, v) in ids.iter().zip(&l) {
                s.push_str(&format!(
                    "{id},{},{},{},{},{}\n",
                    fmt_value(v.local_i),
                    fmt_value(v.z),
                    fmt_value(v.lag),
                    fmt_value(v.p_value),
                    v.category.code()
                ));
            }
            write_text(&out, &s)?;
        }
        Command::Gwr { data, candidates, out } => {
            let d = data.load()?;
            let coords: Vec<(f64, f64)> = d.rows.iter().map(|&r| d.table.centroids()[r]).collect();
            let ks: Vec<KernelSpec> = if candidates.is_empty() {
                vec![KernelSpec::Adaptive(d.rows.len())]
            } else {
                candidates.into_iter().map(KernelSpec::Adaptive).collect()
            };
            let (best, trace) = gwr_bandwidth_search(&d.x, &d.y, &coords, &ks).map_err(Runtime::wrap)?;
            for t in &trace {
                eprintln!("{}: AICc {}", t.kernel, t.aicc.map_or("singular".into(), fmt_value));
            }
            let f = gwr_fit(&d.x, &d.y, &coords, best).map_err(Runtime::wrap)?;
            let betas: Vec<String> = d.names.iter().map(|n| format!("beta_{n}")).collect();
            let mut s = format!("zone_id,fitted,residual,local_r2,beta_intercept,{}\n", betas.join(","));
            for (k, &r) in d.rows.iter().enumerate() {
                let betas: Vec<String> = f.betas[k].iter().map(|b| fmt_value(*b)).collect();
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    d.table.zone_ids()[r],
                    fmt_value(f.fitted[k]),
                    fmt_value(f.residuals[k]),
                    fmt_value(f.local_r2[k]),
                    betas.join(",")
                ));
            }
            write_text(&out, &s)?;
            println!("selected {best}, AICc {}", fmt_value(f.aicc));
        }
        Command::Fit { data, config, out } => {
            let d = data.load()?;
            let cfg = load_fit_config(&config)?;
            let o = fit(&d.x, &d.y, &vec![1.0; d.y.len()], &d.names, &cfg).map_err(Runtime::wrap)?;
            write_text(&out, &o.model.to_json())?;
            println!("training RMSE {}", fmt_value(o.train_loss.last().copied().unwrap_or(f64::NAN).sqrt()));
        }
        Command::Gwfit { data, config, candidates, out } => {
            let d = data.load()?;
            let cfg = load_fit_config(&config)?;
            let coords: Vec<(f64, f64)> = d.rows.iter().map(|&r| d.table.centroids()[r]).collect();
            let ids: Vec<i64> = d.rows.iter().map(|&r| d.table.zone_ids()[r]).collect();
            let cands = if candidates.is_empty() { vec![30, 50, 70, 94, 120] } else { candidates };
            let sel = loo_bandwidth(&d.x, &d.y, &coords, &ids, &d.names, &cands, &cfg).map_err(Runtime::wrap)?;
            let mut trace = String::from("k,loo_rmse\n");
            for (k, r) in &sel.trace {
                if r.is_none() {
                    eprintln!("warning: candidate k = {k} skipped (needs 2 <= k < n)");
                }
                trace.push_str(&format!("{k},{}\n", r.map_or("NA".into(), fmt_value)));
            }
            let set = gw_fit(&d.x, &d.y, &coords, &ids, &d.names, LocalKernel::Adaptive(sel.best_k), &cfg).map_err(Runtime::wrap)?;
            write_text(&out.join("bandwidth_trace.csv"), &trace)?;
            let mut r2 = String::from("zone_id,local_r2,prediction\n");
            let mut sr = String::from("zone_id,residual,std_residual\n");
            for (i, m) in set.models.iter().enumerate() {
                r2.push_str(&format!("{},{},{}\n", m.zone_id, fmt_value(m.local_r2), fmt_value(m.prediction)));
                sr.push_str(&format!("{},{},{}\n", m.zone_id, fmt_value(set.residuals[i]), fmt_value(set.std_residuals[i])));
                write_text(&out.join("models").join(format!("zone_{}.json", m.zone_id)), &m.model.to_json())?;
            }
            write_text(&out.join("local_r2.csv"), &r2)?;
            write_text(&out.join("std_residuals.csv"), &sr)?;
            match global_oob(&set, &d.y) {
                Ok(m) => println!("k = {}; pseudo-OOB R2 {}, RMSE {}", sel.best_k, fmt_value(m.r2), fmt_value(m.rmse)),
                Err(_) => println!("k = {}; no OOB instances (subsample = 1)", sel.best_k),
            }
        }
        Command::Explain { model, table, out } => {
            let text = std::fs::read_to_string(&model).map_err(|e| Error::io(&model, e))?;
            let m = heatlens_core::boost::BoostedModel::from_json(&text)?;
            let t = FeatureTable::read_csv(&table)?;
            let rows = t.complete_rows(&m.feature_names)?;
            let x = m.schema_matrix(&t, &rows)?;
            let shap = tree_shap(&m, &x).map_err(Runtime::wrap)?;
            let mut s = format!("zone_id,base_value,{}\n", m.feature_names.join(","));
            for (k, &r) in rows.iter().enumerate() {
                let v: Vec<String> = shap.values[k].iter().map(|p| fmt_value(*p)).collect();
                s.push_str(&format!("{},{},{}\n", t.zone_ids()[r], fmt_value(shap.base_value), v.join(",")));
            }
            write_text(&out, &s)?;
            for (f, v) in shap_summary(&shap) {
                println!("{f},{}", fmt_value(v));
            }
        }
    }
    Ok(())
}

/// Marks an error as arising during computation so it maps to exit code 1
/// even when its kind would otherwise read as an input problem.
struct Runtime;

impl Runtime {
    fn wrap(e: Error) -> Error {
        match e {
            Error::Stage { .. } => e,
            other => Error::Stage { stage: "compute".into(), source: Box::new(other) },
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { stage, .. } if stage == "validate" => 2,
        Error::Stage { .. } => 1,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        e if e.is_input_error() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
