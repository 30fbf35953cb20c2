//! Patch labelling and landscape pattern metrics on integer class grids.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::Validation(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub class: i64,
    pub cells: usize,
    /// m².
    pub area: f64,
    /// Perimeter in cell edges.
    pub edges: usize,
    /// m.
    pub perimeter: f64,
    /// Contiguity index in [0, 1].
    pub contig: f64,
}

#[derive(Debug, Clone)]
pub struct PatchLabeling {
    pub class_grid: Grid,
    /// Patch id per cell (1-based, row-major order of first cell); nodata
    /// outside the classified area.
    pub patch_ids: Grid,
    /// Indexed by `id - 1`.
    pub patches: Vec<Patch>,
    pub connectivity: Connectivity,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller index as root so roots are first cells.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Integer class per cell, `None` for nodata.
fn classes_of(grid: &Grid) -> Result<Vec<Option<i64>>> {
    grid.values()
        .iter()
        .map(|&v| {
            if grid.is_nodata(v) {
                Ok(None)
            } else if v.fract() != 0.0 {
                Err(Error::Validation(format!("class grid holds non-integer value {v}")))
            } else {
                Ok(Some(v as i64))
            }
        })
        .collect()
}

const CONTIG_TEMPLATE_SUM: f64 = 13.0;

/// Connected components of equal class.
pub fn label_patches(class_grid: &Grid, connectivity: Connectivity) -> Result<PatchLabeling> {
    let classes = classes_of(class_grid)?;
    let (w, h) = (class_grid.width(), class_grid.height());
    let mut uf = UnionFind::new(w * h);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let Some(k) = classes[i] else { continue };
            let mut link = |rr: isize, cc: isize| {
                if rr < 0 || cc < 0 || cc >= w as isize {
                    return;
                }
                let j = rr as usize * w + cc as usize;
                if classes[j] == Some(k) {
                    uf.union(i, j);
                }
            };
            let (ri, ci) = (r as isize, c as isize);
            link(ri, ci - 1);
            link(ri - 1, ci);
            if connectivity == Connectivity::Eight {
                link(ri - 1, ci - 1);
                link(ri - 1, ci + 1);
            }
        }
    }
    let cs = class_grid.cell_size();
    let mut root_to_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut ids = vec![0usize; w * h];
    let mut patches: Vec<Patch> = Vec::new();
    for i in 0..w * h {
        let Some(k) = classes[i] else { continue };
        let root = uf.find(i);
        let id = *root_to_id.entry(root).or_insert_with(|| {
            patches.push(Patch {
                id: patches.len() + 1,
                class: k,
                cells: 0,
                area: 0.0,
                edges: 0,
                perimeter: 0.0,
                contig: 0.0,
            });
            patches.len()
        });
        ids[i] = id;
    }
    let mut contig_sum = vec![0.0; patches.len()];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let id = ids[i];
            if id == 0 {
                continue;
            }
            let p = &mut patches[id - 1];
            p.cells += 1;
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                let same = rr >= 0
                    && cc >= 0
                    && (rr as usize) < h
                    && (cc as usize) < w
                    && classes[rr as usize * w + cc as usize] == classes[i];
                if !same {
                    p.edges += 1;
                }
            }
            let mut s = 0.0;
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                        continue;
                    }
                    if ids[rr as usize * w + cc as usize] != id {
                        continue;
                    }
                    s += match (dr, dc) {
                        (0, 0) => 1.0,
                        (0, _) | (_, 0) => 2.0,
                        _ => 1.0,
                    };
                }
            }
            contig_sum[id - 1] += s;
        }
    }
    for (p, s) in patches.iter_mut().zip(&contig_sum) {
        p.area = p.cells as f64 * cs * cs;
        p.perimeter = p.edges as f64 * cs;
        p.contig = (s / p.cells as f64 - 1.0) / (CONTIG_TEMPLATE_SUM - 1.0);
    }
    let nodata = class_grid.nodata();
    let patch_ids = class_grid.with_values(ids.iter().map(|&id| if id == 0 { nodata } else { id as f64 }).collect())?;
    Ok(PatchLabeling {
        class_grid: class_grid.clone(),
        patch_ids,
        patches,
        connectivity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Pland,
    Pd,
    Lsi,
    Cohesion,
    Pafrac,
    ContigAm,
    Contag,
    Shdi,
    Shei,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Pland,
        Metric::Pd,
        Metric::Lsi,
        Metric::Cohesion,
        Metric::Pafrac,
        Metric::ContigAm,
        Metric::Contag,
        Metric::Shdi,
        Metric::Shei,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pland => "PLAND",
            Metric::Pd => "PD",
            Metric::Lsi => "LSI",
            Metric::Cohesion => "COHESION",
            Metric::Pafrac => "PAFRAC",
            Metric::ContigAm => "CONTIG_AM",
            Metric::Contag => "CONTAG",
            Metric::Shdi => "SHDI",
            Metric::Shei => "SHEI",
        }
    }

    /// Metrics reported per class; the others are landscape-level only.
    /// PD and LSI are reported at both levels.
    pub fn has_class_level(self) -> bool {
        matches!(
            self,
            Metric::Pland | Metric::Pd | Metric::Lsi | Metric::Cohesion | Metric::Pafrac | Metric::ContigAm
        )
    }

    pub fn has_landscape_level(self) -> bool {
        matches!(self, Metric::Pd | Metric::Lsi | Metric::Contag | Metric::Shdi | Metric::Shei)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Validation(format!("unknown landscape metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub metric: Metric,
    /// `None` for landscape-level values.
    pub class: Option<i64>,
    /// `None` when the metric is undefined for this input.
    pub value: Option<f64>,
}

/// Shared tallies for metric evaluation.
struct Tallies {
    classes: Vec<i64>,
    total_cells: usize,
    area: f64,
    cs: f64,
    /// Cell edges of each class facing another class, nodata or the grid
    /// boundary.
    class_edges: BTreeMap<i64, usize>,
    /// Landscape edge count: boundary/nodata edges plus class–class edges
    /// counted once.
    landscape_edges: usize,
    /// Orthogonal like/unlike adjacencies, double counted.
    adjacency: BTreeMap<(i64, i64), usize>,
    cells_per_class: BTreeMap<i64, usize>,
}

fn tally(lab: &PatchLabeling) -> Result<Tallies> {
    let classes = classes_of(&lab.class_grid)?;
    let g = &lab.class_grid;
    let (w, h) = (g.width(), g.height());
    let mut class_edges = BTreeMap::new();
    let mut adjacency = BTreeMap::new();
    let mut cells_per_class = BTreeMap::new();
    let mut landscape_edges = 0usize;
    let mut total = 0usize;
    for r in 0..h {
        for c in 0..w {
            let Some(k) = classes[r * w + c] else { continue };
            total += 1;
            *cells_per_class.entry(k).or_insert(0usize) += 1;
            for (dr, dc) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                let other = if rr < 0 || cc < 0 || rr as usize >= h || cc as usize >= w {
                    None
                } else {
                    classes[rr as usize * w + cc as usize]
                };
                match other {
                    Some(o) => {
                        *adjacency.entry((k, o)).or_insert(0usize) += 1;
                        if o != k {
                            *class_edges.entry(k).or_insert(0usize) += 1;
                            // Each unlike edge is seen from both sides.
                            if k < o {
                                landscape_edges += 1;
                            }
                        }
                    }
                    None => {
                        *class_edges.entry(k).or_insert(0usize) += 1;
                        landscape_edges += 1;
                    }
                }
            }
        }
    }
    let cs = g.cell_size();
    Ok(Tallies {
        classes: cells_per_class.keys().copied().collect(),
        total_cells: total,
        area: total as f64 * cs * cs,
        cs,
        class_edges,
        landscape_edges,
        adjacency,
        cells_per_class,
    })
}

fn class_value(metric: Metric, k: i64, lab: &PatchLabeling, t: &Tallies) -> Option<f64> {
    let patches: Vec<&Patch> = lab.patches.iter().filter(|p| p.class == k).collect();
    match metric {
        Metric::Pland => Some(100.0 * t.cells_per_class[&k] as f64 / t.total_cells as f64),
        Metric::Pd => Some(patches.len() as f64 / t.area * 1e6),
        Metric::Lsi => Some(0.25 * t.class_edges.get(&k).copied().unwrap_or(0) as f64 * t.cs / t.area.sqrt()),
        Metric::Cohesion => {
            let z = t.total_cells as f64;
            if z <= 1.0 {
                return None;
            }
            let sp: f64 = patches.iter().map(|p| p.edges as f64).sum();
            let spa: f64 = patches.iter().map(|p| p.edges as f64 * (p.cells as f64).sqrt()).sum();
            Some((1.0 - sp / spa) / (1.0 - 1.0 / z.sqrt()) * 100.0)
        }
        Metric::Pafrac => {
            let n = patches.len() as f64;
            if patches.len() < 2 {
                return None;
            }
            let (mut sp, mut sa, mut spa, mut saa) = (0.0, 0.0, 0.0, 0.0);
            for p in &patches {
                let lp = p.perimeter.ln();
                let la = p.area.ln();
                sp += lp;
                sa += la;
                spa += lp * la;
                saa += la * la;
            }
            let den = n * saa - sa * sa;
            if den.abs() <= 1e-12 * (n * saa).abs().max(1.0) {
                return None;
            }
            Some((n * spa - sp * sa) / den)
        }
        Metric::ContigAm => {
            let a: f64 = patches.iter().map(|p| p.area).sum();
            Some(patches.iter().map(|p| p.contig * p.area).sum::<f64>() / a)
        }
        _ => None,
    }
}

fn landscape_value(metric: Metric, lab: &PatchLabeling, t: &Tallies) -> Option<f64> {
    let m = t.classes.len();
    let props: Vec<f64> = t
        .classes
        .iter()
        .map(|k| t.cells_per_class[k] as f64 / t.total_cells as f64)
        .collect();
    let shdi = || -props.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
    match metric {
        Metric::Pd => Some(lab.patches.len() as f64 / t.area * 1e6),
        Metric::Lsi => Some(0.25 * t.landscape_edges as f64 * t.cs / t.area.sqrt()),
        Metric::Shdi => Some(shdi()),
        Metric::Shei => {
            if m < 2 {
                None
            } else {
                Some(shdi() / (m as f64).ln())
            }
        }
        Metric::Contag => {
            if m < 2 {
                return Some(100.0);
            }
            let mut s = 0.0;
            for (ii, &i) in t.classes.iter().enumerate() {
                let row: usize = t.classes.iter().map(|&k| t.adjacency.get(&(i, k)).copied().unwrap_or(0)).sum();
                if row == 0 {
                    continue;
                }
                for &k in &t.classes {
                    let g = t.adjacency.get(&(i, k)).copied().unwrap_or(0);
                    if g == 0 {
                        continue;
                    }
                    let q = props[ii] * g as f64 / row as f64;
                    s += q * q.ln();
                }
            }
            Some((1.0 + s / (2.0 * (m as f64).ln())) * 100.0)
        }
        _ => None,
    }
}

/// Evaluates the requested metrics. For each metric, class-level values
/// come first in ascending class order, then the landscape-level value.
pub fn compute_metrics(lab: &PatchLabeling, requested: &[Metric]) -> Result<Vec<MetricValue>> {
    let t = tally(lab)?;
    if t.total_cells == 0 {
        return Err(Error::Validation("class grid has no classified cells".into()));
    }
    let per_metric: Vec<Vec<MetricValue>> = requested
        .par_iter()
        .map(|&metric| {
            let mut out = Vec::new();
            if metric.has_class_level() {
                for &k in &t.classes {
                    out.push(MetricValue { metric, class: Some(k), value: class_value(metric, k, lab, &t) });
                }
            }
            if metric.has_landscape_level() {
                out.push(MetricValue { metric, class: None, value: landscape_value(metric, lab, &t) });
            }
            out
        })
        .collect();
    Ok(per_metric.into_iter().flatten().collect())
}

/// Looks up one value from a metric list.
pub fn find_value(values: &[MetricValue], metric: Metric, class: Option<i64>) -> Option<f64> {
    values
        .iter()
        .find(|v| v.metric == metric && v.class == class)
        .and_then(|v| v.value)
}

/// Metrics evaluated separately inside each zone (cells of other zones are
/// treated as outside the landscape).
pub fn zone_metrics(
    class_grid: &Grid,
    zone_raster: &Grid,
    connectivity: Connectivity,
    requested: &[Metric],
) -> Result<BTreeMap<i64, Vec<MetricValue>>> {
    class_grid.ensure_aligned(zone_raster, "zones vs land cover")?;
    let (w, h) = (class_grid.width(), class_grid.height());
    let mut bounds: BTreeMap<i64, [usize; 4]> = BTreeMap::new();
    for r in 0..h {
        for c in 0..w {
            if let Some(z) = zone_raster.value(r, c) {
                let b = bounds.entry(z as i64).or_insert([r, c, r, c]);
                b[0] = b[0].min(r);
                b[1] = b[1].min(c);
                b[2] = b[2].max(r);
                b[3] = b[3].max(c);
            }
        }
    }
    let results: Vec<(i64, Result<Option<Vec<MetricValue>>>)> = bounds
        .par_iter()
        .map(|(&z, b)| {
            let (bw, bh) = (b[3] - b[1] + 1, b[2] - b[0] + 1);
            let mut hdr = class_grid.header();
            hdr.width = bw;
            hdr.height = bh;
            let nodata = hdr.nodata;
            let mut vals = Vec::with_capacity(bw * bh);
            for r in b[0]..=b[2] {
                for c in b[1]..=b[3] {
                    let inside = zone_raster.value(r, c).map(|v| v as i64) == Some(z);
                    vals.push(match (inside, class_grid.value(r, c)) {
                        (true, Some(v)) => v,
                        _ => nodata,
                    });
                }
            }
            let res = (|| {
                let sub = Grid::new(hdr, vals)?;
                if sub.count_nodata() == sub.len() {
                    return Ok(None);
                }
                let lab = label_patches(&sub, connectivity)?;
                compute_metrics(&lab, requested).map(Some)
            })();
            (z, res)
        })
        .collect();
    let mut out = BTreeMap::new();
    for (z, r) in results {
        if let Some(v) = r? {
            out.insert(z, v);
        }
    }
    Ok(out)
}
