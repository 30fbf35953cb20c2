//! Shapley attributions for boosted ensembles: exact path-dependent TreeSHAP,
//! an interventional brute-force enumerator, rankings and per-zone maps.

use rayon::prelude::*;

use crate::boost::{BoostedModel, Node, Tree};
use crate::error::{Error, Result};
use crate::gwboost::LocalModelSet;
use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapMatrix {
    pub feature_names: Vec<String>,
    /// One row of attributions per sample, in response units.
    pub values: Vec<Vec<f64>>,
    /// Expected model output under the training covers.
    pub base_value: f64,
}

#[derive(Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem { feature, zero, one, weight: if l == 0 { 1.0 } else { 0.0 } });
    let lf = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / lf;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / lf;
    }
}

fn unwind(path: &mut Vec<PathElem>, idx: usize) {
    let l = path.len() - 1;
    let PathElem { zero, one, .. } = path[idx];
    let mut next = path[l].weight;
    let lf = (l + 1) as f64;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = next * lf / ((j + 1) as f64 * one);
            next = t - path[j].weight * zero * (l - j) as f64 / lf;
        } else {
            path[j].weight = path[j].weight * lf / (zero * (l - j) as f64);
        }
    }
    for j in idx..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], idx: usize) -> f64 {
    let l = path.len() - 1;
    let PathElem { zero, one, .. } = path[idx];
    let lf = (l + 1) as f64;
    let mut next = path[l].weight;
    let mut total = 0.0;
    for i in (0..l).rev() {
        if one != 0.0 {
            let t = next * lf / ((i + 1) as f64 * one);
            total += t;
            next = path[i].weight - t * zero * (l - i) as f64 / lf;
        } else {
            total += path[i].weight / zero / ((l - i) as f64 / lf);
        }
    }
    total
}

struct ShapTree<'a> {
    nodes: &'a [Node],
    x: &'a [f64],
    scale: f64,
}

impl ShapTree<'_> {
    fn recurse(&self, j: usize, mut path: Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>, phi: &mut [f64]) {
        extend(&mut path, zero, one, feature);
        match &self.nodes[j] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let e = path[i];
                    if let Some(f) = e.feature {
                        phi[f] += w * (e.one - e.zero) * value * self.scale;
                    }
                }
            }
            Node::Split { feature: f, threshold, left, right, cover, .. } => {
                let (hot, cold) = if self.x[*f] < *threshold { (*left, *right) } else { (*right, *left) };
                let (mut iz, mut io) = (1.0, 1.0);
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*f)) {
                    iz = path[k].zero;
                    io = path[k].one;
                    unwind(&mut path, k);
                }
                let rh = self.nodes[hot].cover() / cover;
                let rc = self.nodes[cold].cover() / cover;
                self.recurse(hot, path.clone(), iz * rh, io, Some(*f), phi);
                self.recurse(cold, path, iz * rc, 0.0, Some(*f), phi);
            }
        }
    }
}

fn check_covers(model: &BoostedModel) -> Result<()> {
    for (t, tree) in model.trees.iter().enumerate() {
        if tree.nodes().iter().any(|n| !(n.cover() > 0.0 && n.cover().is_finite())) {
            return Err(Error::Model(format!("tree {t} lacks cover statistics")));
        }
    }
    Ok(())
}

/// Cover-weighted mean leaf value of a tree.
pub fn tree_expectation(tree: &Tree) -> f64 {
    fn go(nodes: &[Node], j: usize) -> f64 {
        match &nodes[j] {
            Node::Leaf { value, .. } => *value,
            Node::Split { left, right, cover, .. } => {
                (nodes[*left].cover() * go(nodes, *left) + nodes[*right].cover() * go(nodes, *right)) / cover
            }
        }
    }
    go(tree.nodes(), 0)
}

/// Expected model output implied by the root covers.
pub fn expected_value(model: &BoostedModel) -> f64 {
    model.base_score + model.learning_rate * model.trees.iter().map(tree_expectation).sum::<f64>()
}

/// Attributions for one row.
pub fn shap_row(model: &BoostedModel, x: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; model.n_features()];
    for t in &model.trees {
        let st = ShapTree { nodes: t.nodes(), x, scale: model.learning_rate };
        st.recurse(0, Vec::with_capacity(8), 1.0, 1.0, None, &mut phi);
    }
    phi
}

/// Exact path-dependent TreeSHAP for every row of `x`.
pub fn tree_shap(model: &BoostedModel, x: &[Vec<f64>]) -> Result<ShapMatrix> {
    check_covers(model)?;
    if let Some(r) = x.iter().find(|r| r.len() != model.n_features()) {
        return Err(Error::Validation(format!("row has {} features, model expects {}", r.len(), model.n_features())));
    }
    let values = x.par_iter().map(|r| shap_row(model, r)).collect();
    Ok(ShapMatrix { feature_names: model.feature_names.clone(), values, base_value: expected_value(model) })
}

pub const BRUTE_MAX_FEATURES: usize = 12;

/// Shapley values by full subset enumeration with the interventional value
/// function v(S) = mean over background rows of f(x_S, b_rest).
pub fn brute_shapley(model: &BoostedModel, x: &[f64], background: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = model.n_features();
    if p > BRUTE_MAX_FEATURES {
        return Err(Error::Validation(format!("brute-force Shapley limited to {BRUTE_MAX_FEATURES} features, got {p}")));
    }
    if background.is_empty() {
        return Err(Error::Validation("empty background".into()));
    }
    if x.len() != p || background.iter().any(|b| b.len() != p) {
        return Err(Error::Validation("row length does not match the model".into()));
    }
    let v: Vec<f64> = (0..1usize << p)
        .map(|mask| {
            let mut row = vec![0.0; p];
            let mut s = 0.0;
            for b in background {
                for f in 0..p {
                    row[f] = if mask >> f & 1 == 1 { x[f] } else { b[f] };
                }
                s += model.predict_row(&row);
            }
            s / background.len() as f64
        })
        .collect();
    Ok(shapley_from_values(p, &v))
}

/// Shapley values from a value function tabulated over all 2^p subsets
/// (bit f of the index marks feature f present).
pub fn shapley_from_values(p: usize, v: &[f64]) -> Vec<f64> {
    let fact: Vec<f64> = (0..=p).scan(1.0, |a, k| {
        if k > 0 {
            *a *= k as f64;
        }
        Some(*a)
    })
    .collect();
    let mut phi = vec![0.0; p];
    for (f, ph) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << p {
            if mask >> f & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[p - s - 1] / fact[p];
            *ph += w * (v[mask | 1 << f] - v[mask]);
        }
    }
    phi
}

/// Features ranked by mean |φ|, descending; ties by name.
pub fn shap_summary(shap: &ShapMatrix) -> Vec<(String, f64)> {
    let n = shap.values.len().max(1) as f64;
    let mut out: Vec<(String, f64)> = shap
        .feature_names
        .iter()
        .enumerate()
        .map(|(f, name)| (name.clone(), shap.values.iter().map(|r| r[f].abs()).sum::<f64>() / n))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// (feature value, φ, colouring feature value) triples for a dependence plot.
pub fn dependence_rows(shap: &ShapMatrix, x: &[Vec<f64>], feature: &str, color: Option<&str>) -> Result<Vec<(f64, f64, Option<f64>)>> {
    let pos = |name: &str| {
        shap.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Validation(format!("unknown feature: {name}")))
    };
    let f = pos(feature)?;
    let c = color.map(pos).transpose()?;
    Ok(x.iter().zip(&shap.values).map(|(r, phi)| (r[f], phi[f], c.map(|c| r[c]))).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrimary {
    pub zone_id: i64,
    /// Feature with the largest total split gain; `None` if the model never splits.
    pub primary_gain_feature: Option<String>,
    /// Feature with the largest |φ| at the zone's own row; `None` if all φ are 0.
    pub primary_shap_feature: Option<String>,
    pub shap: Vec<f64>,
    pub signed_shap: Option<f64>,
}

fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if *x > 0.0 && best.is_none_or(|b| *x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Per-zone primary features: each zone's own local model is explained at
/// that zone's feature row.
pub fn local_importance_maps(set: &LocalModelSet, table: &FeatureTable, signed_feature: Option<&str>) -> Result<Vec<LocalPrimary>> {
    set.models
        .par_iter()
        .map(|m| {
            let names = &m.model.feature_names;
            let signed = match signed_feature {
                Some(s) => Some(
                    names
                        .iter()
                        .position(|n| n == s)
                        .ok_or_else(|| Error::Validation(format!("unknown feature: {s}")))?,
                ),
                None => None,
            };
            let row = table
                .row_of(m.zone_id)
                .ok_or_else(|| Error::Validation(format!("no feature row for zone {}", m.zone_id)))?;
            let x = m.model.schema_matrix(table, &[row])?;
            check_covers(&m.model)?;
            let phi = shap_row(&m.model, &x[0]);
            let abs: Vec<f64> = phi.iter().map(|v| v.abs()).collect();
            Ok(LocalPrimary {
                zone_id: m.zone_id,
                primary_gain_feature: argmax(&m.model.gain_importance()).map(|i| names[i].clone()),
                primary_shap_feature: argmax(&abs).map(|i| names[i].clone()),
                signed_shap: signed.map(|i| phi[i]),
                shap: phi,
            })
        })
        .collect()
}
