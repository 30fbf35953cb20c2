//! Weighted gradient-boosted regression trees (squared error) with exact
//! greedy splits, row subsampling, out-of-bag tracking, gain importance and
//! nested cross-validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats::Metrics;
use crate::table::FeatureTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_estimators: 500,
            learning_rate: 0.05,
            max_depth: 2,
            subsample: 0.8,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Parses a TOML table of hyperparameters (missing keys take defaults).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: FitConfig = crate::pipeline::parse_toml(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Config("n_estimators must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate)));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("subsample must lie in (0, 1], got {}", self.subsample)));
        }
        if !(self.lambda >= 0.0) || !(self.gamma >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::Config("lambda, gamma and min_child_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// One tree node. Children are indices into the owning tree's node list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        cover: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Leaf { cover, .. } | Node::Split { cover, .. } => *cover,
        }
    }
}

/// A regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from explicit nodes, checking that child links are in
    /// range, acyclic (children after parents) and that covers are positive.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !(n.cover() > 0.0) {
                return Err(Error::Model(format!("node {i} has non-positive cover")));
            }
            if let Node::Split { left, right, threshold, .. } = n {
                if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() || left == right {
                    return Err(Error::Model(format!("node {i} has invalid children")));
                }
                if !threshold.is_finite() {
                    return Err(Error::Model(format!("node {i} has a non-finite threshold")));
                }
            }
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf value reached by `row` (`value < threshold` goes left).
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub config: FitConfig,
}

impl BoostedModel {
    /// Assembles a model from parts (for hand-built or imported trees).
    pub fn from_parts(base_score: f64, learning_rate: f64, trees: Vec<Tree>, feature_names: Vec<String>) -> Result<Self> {
        let p = feature_names.len();
        if trees.iter().filter_map(|t| t.max_feature()).any(|f| f >= p) {
            return Err(Error::Model("tree references a feature outside the schema".into()));
        }
        Ok(BoostedModel {
            base_score,
            learning_rate,
            trees,
            feature_names,
            config: FitConfig { learning_rate, n_estimators: 1, ..FitConfig::default() },
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut s = 0.0;
        for t in &self.trees {
            s += t.eval(row);
        }
        self.base_score + self.learning_rate * s
    }

    /// Predictions for rows laid out in the training feature order.
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(r) = x.iter().find(|r| r.len() != self.n_features()) {
            return Err(Error::Validation(format!(
                "row has {} features, model expects {}",
                r.len(),
                self.n_features()
            )));
        }
        Ok(x.par_iter().map(|r| self.predict_row(r)).collect())
    }

    /// Predictions for the given rows of a feature table, matching columns
    /// by name.
    pub fn predict_table(&self, table: &FeatureTable, rows: &[usize]) -> Result<Vec<f64>> {
        let x = self.schema_matrix(table, rows)?;
        self.predict(&x)
    }

    /// Extracts the model's features from a table, failing with the list of
    /// missing columns.
    pub fn schema_matrix(&self, table: &FeatureTable, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<&str> = self
            .feature_names
            .iter()
            .filter(|n| !table.has_column(n))
            .map(|s| s.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!("missing features: {}", missing.join(", "))));
        }
        table.matrix(&self.feature_names, rows)
    }

    /// Total split gain per feature.
    pub fn gain_importance(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_features()];
        for t in &self.trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    g[*feature] += gain;
                }
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc::from(self);
        serde_json::to_string_pretty(&doc).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        doc.into_model()
    }
}

// Serialised form: every float is a decimal string so that the roundtrip is
// bit-exact regardless of the JSON reader.
#[derive(Serialize, Deserialize)]
struct ModelDoc {
    base_score: String,
    learning_rate: String,
    feature_names: Vec<String>,
    config: FitConfig,
    trees: Vec<Vec<NodeDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NodeDoc {
    Leaf { value: String, cover: String },
    Split { feature: usize, threshold: String, left: usize, right: usize, gain: String, cover: String },
}

fn fstr(v: f64) -> String {
    format!("{v:?}")
}

fn fparse(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse { line: 0, message: format!("invalid number '{s}' in model") })
}

impl From<&BoostedModel> for ModelDoc {
    fn from(m: &BoostedModel) -> Self {
        ModelDoc {
            base_score: fstr(m.base_score),
            learning_rate: fstr(m.learning_rate),
            feature_names: m.feature_names.clone(),
            config: m.config,
            trees: m
                .trees
                .iter()
                .map(|t| {
                    t.nodes
                        .iter()
                        .map(|n| match n {
                            Node::Leaf { value, cover } => NodeDoc::Leaf { value: fstr(*value), cover: fstr(*cover) },
                            Node::Split { feature, threshold, left, right, gain, cover } => NodeDoc::Split {
                                feature: *feature,
                                threshold: fstr(*threshold),
                                left: *left,
                                right: *right,
                                gain: fstr(*gain),
                                cover: fstr(*cover),
                            },
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl ModelDoc {
    fn into_model(self) -> Result<BoostedModel> {
        let mut trees = Vec::with_capacity(self.trees.len());
        for t in self.trees {
            let nodes = t
                .into_iter()
                .map(|n| {
                    Ok(match n {
                        NodeDoc::Leaf { value, cover } => Node::Leaf { value: fparse(&value)?, cover: fparse(&cover)? },
                        NodeDoc::Split { feature, threshold, left, right, gain, cover } => Node::Split {
                            feature,
                            threshold: fparse(&threshold)?,
                            left,
                            right,
                            gain: fparse(&gain)?,
                            cover: fparse(&cover)?,
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            trees.push(Tree::new(nodes)?);
        }
        let mut m = BoostedModel::from_parts(fparse(&self.base_score)?, fparse(&self.learning_rate)?, trees, self.feature_names)?;
        m.config = self.config;
        Ok(m)
    }
}

/// Held-out tracking produced when `subsample < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OobRecord {
    /// Weighted mean squared error on the rows left out of each iteration,
    /// evaluated after that iteration's tree is added.
    pub loss: Vec<f64>,
    /// Rows left out of the final iteration.
    pub final_rows: Vec<usize>,
    /// Final-model predictions for `final_rows`.
    pub final_predictions: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: BoostedModel,
    /// Weighted mean squared training error after each iteration.
    pub train_loss: Vec<f64>,
    pub oob: Option<OobRecord>,
}

struct Trainer<'a> {
    x: &'a [Vec<f64>],
    /// Row indices sorted by each feature (stable).
    order: Vec<Vec<usize>>,
    cfg: &'a FitConfig,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    threshold: f64,
}

impl Trainer<'_> {
    /// Best split of one feature over the rows flagged in `member`.
    fn best_split(&self, f: usize, member: &[bool], g: &[f64], h: &[f64], gt: f64, ht: f64) -> Option<Candidate> {
        let lam = self.cfg.lambda;
        let parent = gt * gt / (ht + lam);
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        let mut prev: Option<f64> = None;
        for &i in &self.order[f] {
            if !member[i] {
                continue;
            }
            let v = self.x[i][f];
            if let Some(pv) = prev {
                if v > pv {
                    let (gr, hr) = (gt - gl, ht - hl);
                    if hl >= self.cfg.min_child_weight && hr >= self.cfg.min_child_weight && hl > 0.0 && hr > 0.0 {
                        let gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent) - self.cfg.gamma;
                        if best.is_none_or(|b| gain > b.gain) {
                            let mut t = 0.5 * (pv + v);
                            if !(t > pv) {
                                t = v;
                            }
                            best = Some(Candidate { gain, threshold: t });
                        }
                    }
                }
            }
            gl += g[i];
            hl += h[i];
            prev = Some(v);
        }
        best
    }

    fn build(&self, nodes: &mut Vec<Node>, rows: Vec<usize>, depth: usize, g: &[f64], h: &[f64]) -> usize {
        let gt: f64 = rows.iter().map(|&i| g[i]).sum();
        let ht: f64 = rows.iter().map(|&i| h[i]).sum();
        let idx = nodes.len();
        let leaf_value = -gt / (ht + self.cfg.lambda);
        nodes.push(Node::Leaf { value: leaf_value, cover: ht });
        if depth >= self.cfg.max_depth || rows.len() < 2 {
            return idx;
        }
        let mut member = vec![false; self.x.len()];
        for &i in &rows {
            member[i] = true;
        }
        let p = self.order.len();
        let per_feature: Vec<Option<Candidate>> =
            (0..p).into_par_iter().map(|f| self.best_split(f, &member, g, h, gt, ht)).collect();
        let mut best: Option<(usize, Candidate)> = None;
        for (f, c) in per_feature.into_iter().enumerate() {
            if let Some(c) = c {
                if best.is_none_or(|(_, b)| c.gain > b.gain) {
                    best = Some((f, c));
                }
            }
        }
        let Some((feature, c)) = best else { return idx };
        if !(c.gain > 0.0) {
            return idx;
        }
        let (lrows, rrows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] < c.threshold);
        let left = self.build(nodes, lrows, depth + 1, g, h);
        let right = self.build(nodes, rrows, depth + 1, g, h);
        nodes[idx] = Node::Split { feature, threshold: c.threshold, left, right, gain: c.gain, cover: ht };
        idx
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<usize> {
    let n = x.len();
    if y.len() != n || w.len() != n {
        return Err(Error::Structure("x, y and weights must have equal length".into()));
    }
    if n < 2 {
        return Err(Error::Validation("need at least 2 training rows".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Structure("ragged feature rows".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("features and target must be finite (impute upstream)".into()));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Validation("sample weights must be finite and >= 0".into()));
    }
    if !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::Validation("sample weights sum to zero".into()));
    }
    Ok(p)
}

/// Weighted mean written as an offset from the minimum so that a constant
/// target yields exactly that constant.
fn weighted_base(y: &[f64], w: &[f64]) -> f64 {
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let sw: f64 = w.iter().sum();
    lo + y.iter().zip(w).map(|(v, wi)| wi * (v - lo)).sum::<f64>() / sw
}

fn weighted_mse(y: &[f64], pred: &[f64], w: &[f64], rows: impl Iterator<Item = usize>) -> f64 {
    let (mut s, mut sw) = (0.0, 0.0);
    for i in rows {
        s += w[i] * (y[i] - pred[i]).powi(2);
        sw += w[i];
    }
    if sw > 0.0 {
        s / sw
    } else {
        f64::NAN
    }
}

/// Fits a boosted ensemble. With `subsample < 1`, each tree sees a seeded
/// sample of round(subsample·n) rows drawn without replacement, and the
/// remaining rows feed the out-of-bag record.
pub fn fit(x: &[Vec<f64>], y: &[f64], weights: &[f64], feature_names: &[String], cfg: &FitConfig) -> Result<FitOutput> {
    cfg.validate()?;
    let p = check_inputs(x, y, weights)?;
    if feature_names.len() != p {
        return Err(Error::Structure(format!("{} feature names for {p} features", feature_names.len())));
    }
    let n = x.len();
    let order: Vec<Vec<usize>> = (0..p)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            o
        })
        .collect();
    let trainer = Trainer { x, order, cfg };
    let base = weighted_base(y, weights);
    let mut pred = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut train_loss = Vec::with_capacity(cfg.n_estimators);
    let sampling = cfg.subsample < 1.0;
    let m = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let mut oob = sampling.then(|| OobRecord { loss: Vec::new(), final_rows: Vec::new(), final_predictions: Vec::new() });
    let mut in_bag = vec![true; n];
    for t in 0..cfg.n_estimators {
        let rows: Vec<usize> = if sampling {
            let mut r = rng::stream(cfg.seed, t as u64);
            let mut s = rand::seq::index::sample(&mut r, n, m).into_vec();
            s.sort_unstable();
            in_bag.iter_mut().for_each(|b| *b = false);
            for &i in &s {
                in_bag[i] = true;
            }
            s
        } else {
            (0..n).collect()
        };
        let g: Vec<f64> = (0..n).map(|i| weights[i] * (pred[i] - y[i])).collect();
        let hs: Vec<f64> = weights.to_vec();
        let ht: f64 = rows.iter().map(|&i| hs[i]).sum();
        if ht > 0.0 {
            let mut nodes = Vec::new();
            trainer.build(&mut nodes, rows, 0, &g, &hs);
            let tree = Tree { nodes };
            for i in 0..n {
                pred[i] += cfg.learning_rate * tree.eval(&x[i]);
            }
            trees.push(tree);
        }
        train_loss.push(weighted_mse(y, &pred, weights, 0..n));
        if let Some(o) = oob.as_mut() {
            o.loss.push(weighted_mse(y, &pred, weights, (0..n).filter(|&i| !in_bag[i])));
        }
    }
    if let Some(o) = oob.as_mut() {
        o.final_rows = (0..n).filter(|&i| !in_bag[i]).collect();
        o.final_predictions = o.final_rows.iter().map(|&i| pred[i]).collect();
    }
    let model = BoostedModel {
        base_score: base,
        learning_rate: cfg.learning_rate,
        trees,
        feature_names: feature_names.to_vec(),
        config: *cfg,
    };
    Ok(FitOutput { model, train_loss, oob })
}

/// Hyperparameter lattice; each axis defaults to the base config's value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitGrid {
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub subsample: Vec<f64>,
}

impl FitGrid {
    /// Cartesian product in the order n_estimators, learning_rate,
    /// max_depth, subsample (last axis fastest).
    pub fn expand(&self, base: &FitConfig) -> Vec<FitConfig> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let oru = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &ne in &oru(&self.n_estimators, base.n_estimators) {
            for &lr in &or(&self.learning_rate, base.learning_rate) {
                for &md in &oru(&self.max_depth, base.max_depth) {
                    for &ss in &or(&self.subsample, base.subsample) {
                        out.push(FitConfig { n_estimators: ne, learning_rate: lr, max_depth: md, subsample: ss, ..*base });
                    }
                }
            }
        }
        out
    }
}

/// Seeded assignment of `n` rows to `k` folds of near-equal size.
pub fn kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0x464f_4c44));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

fn subset<T: Clone>(v: &[T], rows: &[usize]) -> Vec<T> {
    rows.iter().map(|&i| v[i].clone()).collect()
}

fn cv_rmse(x: &[Vec<f64>], y: &[f64], names: &[String], cfg: &FitConfig, folds: &[Vec<usize>], rows: &[usize]) -> Result<f64> {
    let mut s = 0.0;
    for (k, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds.iter().enumerate().filter(|(j, _)| *j != k).flat_map(|(_, f)| f.iter().copied()).collect();
        let tr: Vec<usize> = train.iter().map(|&i| rows[i]).collect();
        let te: Vec<usize> = test.iter().map(|&i| rows[i]).collect();
        let xt = subset(x, &tr);
        let yt = subset(y, &tr);
        let out = fit(&xt, &yt, &vec![1.0; tr.len()], names, cfg)?;
        let pred = out.model.predict(&subset(x, &te))?;
        s += Metrics::compute(&subset(y, &te), &pred).rmse;
    }
    Ok(s / folds.len() as f64)
}

#[derive(Debug, Clone)]
pub struct NestedCvResult {
    pub best: FitConfig,
    pub best_index: usize,
    /// Winning config index per outer fold.
    pub winners: Vec<usize>,
    pub outer: Vec<Metrics>,
    pub mean: Metrics,
    pub sd: Metrics,
}

/// Nested cross-validation: an inner k-fold grid search by mean RMSE picks
/// a config per outer fold (ties toward the earlier config); the winner is
/// refitted on the outer-training rows and scored on the outer-test rows.
/// The reported config is the most frequent winner, ties broken by the
/// lower mean outer RMSE of the folds it won.
pub fn nested_cv(
    x: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    grid: &[FitConfig],
    outer_folds: usize,
    inner_folds: usize,
    seed: u64,
) -> Result<NestedCvResult> {
    if grid.is_empty() {
        return Err(Error::Validation("hyperparameter grid is empty".into()));
    }
    for c in grid {
        c.validate()?;
    }
    let n = x.len();
    if outer_folds < 2 || inner_folds < 2 {
        return Err(Error::Validation("fold counts must be >= 2".into()));
    }
    if n < outer_folds * 2 {
        return Err(Error::Validation(format!("need at least {} rows for {outer_folds} outer folds", outer_folds * 2)));
    }
    check_inputs(x, y, &vec![1.0; n])?;
    let outer = kfold(n, outer_folds, seed);
    let mut winners = Vec::with_capacity(outer_folds);
    let mut metrics = Vec::with_capacity(outer_folds);
    for (o, test) in outer.iter().enumerate() {
        let train: Vec<usize> = outer.iter().enumerate().filter(|(j, _)| *j != o).flat_map(|(_, f)| f.iter().copied()).collect();
        let inner = kfold(train.len(), inner_folds, rng::derive_seed(seed, o as u64 + 1));
        let scores: Vec<f64> = grid
            .par_iter()
            .map(|cfg| cv_rmse(x, y, names, cfg, &inner, &train))
            .collect::<Result<_>>()?;
        let mut w = 0usize;
        for (k, s) in scores.iter().enumerate() {
            if *s < scores[w] {
                w = k;
            }
        }
        let out = fit(&subset(x, &train), &subset(y, &train), &vec![1.0; train.len()], names, &grid[w])?;
        let pred = out.model.predict(&subset(x, test))?;
        metrics.push(Metrics::compute(&subset(y, test), &pred));
        winners.push(w);
    }
    let mut best_index = winners[0];
    let mut best_key = (0usize, f64::INFINITY);
    for c in 0..grid.len() {
        let won: Vec<f64> = winners.iter().zip(&metrics).filter(|(w, _)| **w == c).map(|(_, m)| m.rmse).collect();
        if won.is_empty() {
            continue;
        }
        let key = (won.len(), crate::stats::mean(&won));
        if key.0 > best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
            best_key = key;
            best_index = c;
        }
    }
    let col = |f: fn(&Metrics) -> f64| metrics.iter().map(f).collect::<Vec<f64>>();
    let summarize = |v: Vec<f64>| (crate::stats::mean(&v), crate::stats::sample_sd(&v));
    let (r2m, r2s) = summarize(col(|m| m.r2));
    let (maem, maes) = summarize(col(|m| m.mae));
    let (rm, rs) = summarize(col(|m| m.rmse));
    Ok(NestedCvResult {
        best: grid[best_index],
        best_index,
        winners,
        outer: metrics,
        mean: Metrics { r2: r2m, mae: maem, rmse: rm },
        sd: Metrics { r2: r2s, mae: maes, rmse: rs },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    fn cfg(t: usize, depth: usize, eta: f64, lambda: f64) -> FitConfig {
        FitConfig { n_estimators: t, learning_rate: eta, max_depth: depth, subsample: 1.0, lambda, gamma: 0.0, min_child_weight: 1.0, seed: 1 }
    }

    #[test]
    fn two_point_geometric_decay() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [0.0, 1.0];
        let out = fit(&x, &y, &[1.0, 1.0], &names(1), &cfg(10, 1, 0.3, 0.0)).unwrap();
        let p = out.model.predict(&x).unwrap();
        assert!((p[0] - 0.5 * 0.7f64.powi(10)).abs() < 1e-9);
        assert!((p[1] - (1.0 - 0.5 * 0.7f64.powi(10))).abs() < 1e-9);
    }

    #[test]
    fn constant_target_is_exact() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * 3 % 5) as f64]).collect();
        let y = [0.1; 7];
        let out = fit(&x, &y, &[1.0; 7], &names(2), &cfg(5, 2, 0.3, 0.0)).unwrap();
        assert!(out.model.predict(&x).unwrap().iter().all(|&v| v == 0.1));
        assert!(out.model.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn zero_trees_predict_base() {
        let m = BoostedModel::from_parts(2.5, 0.1, vec![], names(2)).unwrap();
        assert_eq!(m.predict(&[vec![1.0, 2.0]]).unwrap(), vec![2.5]);
        assert_eq!(m.gain_importance(), vec![0.0, 0.0]);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 - r[1]).collect();
        let c = FitConfig { n_estimators: 20, subsample: 0.7, ..FitConfig::default() };
        let m = fit(&x, &y, &vec![1.0; 40], &names(2), &c).unwrap().model;
        let back = BoostedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn errors() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(fit(&x, &[0.0, 1.0], &[0.0, 0.0], &names(1), &cfg(1, 1, 0.3, 1.0)).is_err());
        assert!(fit(&x[..1], &[0.0], &[1.0], &names(1), &cfg(1, 1, 0.3, 1.0)).is_err());
        let m = BoostedModel::from_parts(0.0, 0.1, vec![], vec!["a".into(), "b".into()]).unwrap();
        let t = FeatureTable::new(vec![1], vec![(0.0, 0.0)]).unwrap();
        let err = m.predict_table(&t, &[0]).unwrap_err().to_string();
        assert!(err.contains("a, b"), "{err}");
        assert!(nested_cv(&x, &[0.0, 1.0], &names(1), &[], 5, 5, 0).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let f = kfold(23, 5, 9);
        let mut all: Vec<usize> = f.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|x| x.len() == 4 || x.len() == 5));
    }
}
