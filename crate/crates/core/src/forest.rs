//! Deterministic random-forest regressor with impurity-decrease feature
//! importance.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT: &str = "cellac-forest";
const VERSION: u32 = 1;

/// Ordered feature names shared by every vector of a model.
#[derive(Clone, PartialEq, Eq)]
pub struct FeatureSchema(Arc<[String]>);

impl FeatureSchema {
    pub fn new<I, S>(names: I) -> FeatureSchema
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        FeatureSchema(names.into_iter().map(Into::into).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    fn same(&self, other: &FeatureSchema) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    schema: FeatureSchema,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(schema: FeatureSchema, values: Vec<f64>) -> Result<FeatureVector> {
        if values.len() != schema.len() {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features", schema.len()),
                got: format!("{} values", values.len()),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "feature `{}` is not finite",
                schema.names()[i]
            )));
        }
        Ok(FeatureVector { schema, values })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.schema.index(name).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `⌈√d⌉` of the features that
    /// vary in the training data.
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            feature_subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    fn validate(&self, width: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidArgument("tree has no nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let ok = match *node {
                Node::Leaf { value } => value.is_finite(),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => feature < width && !threshold.is_nan() && left > i && right > i && left < n && right < n,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("malformed tree node {i}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    schema: FeatureSchema,
    params: ForestParams,
    trees: Vec<Tree>,
    importance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    features: Vec<String>,
    params: ForestParams,
    importance: Vec<f64>,
    trees: Vec<Tree>,
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [f64],
    active: &'a [usize],
    mtry: usize,
    max_depth: usize,
    min_leaf: usize,
    gains: Vec<f64>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Builder<'_> {
    fn sse(&self, idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / n;
        let sse = idx.iter().map(|&i| (self.ys[i] - mean).powi(2)).sum();
        (mean, sse)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (mean, sse) = self.sse(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || sse <= 1e-12 * idx.len() as f64 {
            return id;
        }
        let Some(best) = self.best_split(&idx, sse, rng) else {
            return id;
        };
        self.gains[best.feature] += best.gain;
        let left = self.grow(best.left, depth + 1, rng);
        let right = self.grow(best.right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Try `mtry` random features; if none of them can split the node, keep
    /// drawing from the remaining ones.
    fn best_split(&self, idx: &[usize], parent_sse: f64, rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let mut order = self.active.to_vec();
        order.shuffle(rng);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]).then(a.cmp(&b)));
            let n = sorted.len();
            let total: f64 = sorted.iter().map(|&i| self.ys[i]).sum();
            let total_sq: f64 = sorted.iter().map(|&i| self.ys[i] * self.ys[i]).sum();
            let (mut ls, mut lsq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let y = self.ys[sorted[k]];
                ls += y;
                lsq += y * y;
                let (nl, nr) = (k + 1, n - k - 1);
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let (a, b) = (self.xs[sorted[k]][f], self.xs[sorted[k + 1]][f]);
                if a >= b {
                    continue;
                }
                let rs = total - ls;
                let rsq = total_sq - lsq;
                let sse = (lsq - ls * ls / nl as f64) + (rsq - rs * rs / nr as f64);
                let gain = parent_sse - sse;
                if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, gain));
                }
            }
        }
        let (feature, threshold, gain) = best?;
        let (left, right) = idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
        Some(BestSplit {
            feature,
            threshold,
            gain,
            left,
            right,
        })
    }
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Fit a forest on `(vector, target)` samples. All vectors must share a
/// schema.
pub fn fit(samples: &[(FeatureVector, f64)], params: &ForestParams) -> Result<ForestModel> {
    if samples.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 training samples, got {}",
            samples.len()
        )));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::InvalidArgument("n_trees and min_leaf must be positive".into()));
    }
    let schema = samples[0].0.schema.clone();
    for (x, y) in samples {
        if !x.schema.same(&schema) {
            return Err(Error::SchemaMismatch {
                expected: format!("{:?}", schema.names()),
                got: format!("{:?}", x.schema.names()),
            });
        }
        if !y.is_finite() {
            return Err(Error::Training("training target is not finite".into()));
        }
    }
    let d = schema.len();
    let active: Vec<usize> = (0..d)
        .filter(|&f| {
            let first = samples[0].0.values[f];
            samples.iter().any(|(x, _)| x.values[f] != first)
        })
        .collect();

    // Canonical sample order so that input order does not matter.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let key = |i: usize| -> Vec<f64> {
        let mut k: Vec<f64> = active.iter().map(|&f| samples[i].0.values[f]).collect();
        k.push(samples[i].1);
        k
    };
    let keys: Vec<Vec<f64>> = (0..samples.len()).map(key).collect();
    order.sort_by(|&a, &b| cmp_rows(&keys[a], &keys[b]));
    let xs: Vec<&[f64]> = order.iter().map(|&i| samples[i].0.values.as_slice()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| samples[i].1).collect();

    let mtry = params
        .feature_subsample
        .unwrap_or_else(|| (active.len() as f64).sqrt().ceil() as usize)
        .clamp(1, active.len().max(1));

    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.gen()).collect();
    let n = ys.len();

    let grown: Vec<(Tree, Vec<f64>)> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            idx.sort_unstable();
            let mut b = Builder {
                xs: &xs,
                ys: &ys,
                active: &active,
                mtry,
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                gains: vec![0.0; d],
                nodes: Vec::new(),
            };
            b.grow(idx, 0, &mut rng);
            (Tree { nodes: b.nodes }, b.gains)
        })
        .collect();

    let mut importance = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, gains) in grown {
        for (acc, g) in importance.iter_mut().zip(gains) {
            *acc += g;
        }
        trees.push(tree);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        schema,
        params: *params,
        trees,
        importance,
    })
}

impl ForestModel {
    /// Assemble a model from explicit trees; importances are zero.
    pub fn from_trees(schema: FeatureSchema, trees: Vec<Tree>) -> Result<ForestModel> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
        }
        for t in &trees {
            t.validate(schema.len())?;
        }
        let importance = vec![0.0; schema.len()];
        Ok(ForestModel {
            params: ForestParams {
                n_trees: trees.len(),
                ..Default::default()
            },
            schema,
            trees,
            importance,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the tree outputs.
    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if !x.schema.same(&self.schema) {
            return Err(Error::SchemaMismatch {
                expected: format!("{:?}", self.schema.names()),
                got: format!("{:?}", x.schema.names()),
            });
        }
        Ok(self.predict_values(&x.values))
    }

    fn predict_values(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.eval(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Normalized impurity-decrease importances in schema order.
    pub fn importance(&self) -> Vec<(String, f64)> {
        self.schema
            .names()
            .iter()
            .cloned()
            .zip(self.importance.iter().copied())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            features: self.schema.names().to_vec(),
            params: self.params,
            importance: self.importance.clone(),
            trees: self.trees.clone(),
        };
        serde_json::to_string(&file).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<ForestModel> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::parse("forest model", e.line(), e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::parse(
                "forest model",
                1,
                format!("unsupported format {} v{}", file.format, file.version),
            ));
        }
        let schema = FeatureSchema::new(file.features);
        if file.importance.len() != schema.len() {
            return Err(Error::parse("forest model", 1, "importance length differs from schema"));
        }
        let mut model = ForestModel::from_trees(schema, file.trees)?;
        model.params = file.params;
        model.importance = file.importance;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ForestModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
