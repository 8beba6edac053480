//! Gradient-boosted regression trees on squared error, and the 10-member
//! disjoint-subset ensemble used for uncertainty filtering.
//!
//! Trees are grown with exact greedy split search over presorted feature
//! columns. Candidate thresholds are midpoints between consecutive distinct
//! values; among equal gains the lowest feature index (then lowest threshold)
//! wins, so training is fully determined by the data and the seed.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::LabeledExample;

pub const DEFAULT_MEMBERS: usize = 10;
pub const UNVERSIONED_LAYOUT: &str = "unversioned";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorSpec {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 4,
            learning_rate: 0.05,
            min_samples_leaf: 5,
            subsample: 0.8,
            seed: 0,
        }
    }
}

impl RegressorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("regressor: {m}")));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Anything that maps a feature vector to days-until-event.
pub trait Regressor: Send + Sync {
    fn n_features(&self) -> usize;

    /// Prediction for a vector of the right length; callers check the length.
    fn predict_unchecked(&self, values: &[f64]) -> f64;

    fn predict_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.n_features() {
            return Err(Error::LayoutMismatch(format!(
                "model expects {} features, got {}",
                self.n_features(),
                values.len()
            )));
        }
        Ok(self.predict_unchecked(values))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flattened tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_by(|f| x[f])
    }

    fn predict_by(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: RegressorSpec,
    pub feature_layout_version: String,
    pub n_features: usize,
    pub base_prediction: f64,
    pub trees: Vec<RegressionTree>,
}

impl TrainedModel {
    pub fn with_layout(mut self, layout_version: impl Into<String>) -> Self {
        self.feature_layout_version = layout_version.into();
        self
    }

    pub fn predict(&self, values: &[f64]) -> Result<f64> {
        self.predict_values(values)
    }
}

impl Regressor for TrainedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_unchecked(&self, values: &[f64]) -> f64 {
        let lr = self.spec.learning_rate;
        self.trees
            .iter()
            .fold(self.base_prediction, |acc, t| acc + lr * t.predict(values))
    }
}

/// Mean that is exact when all values are equal.
fn stable_mean(values: &[f64]) -> f64 {
    let first = values[0];
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

fn mean_squared(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64
}

/// Column-major training matrix with per-feature row orderings.
struct Columns {
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl Columns {
    fn new(examples: &[&LabeledExample], n_features: usize) -> Self {
        let cols: Vec<Vec<f64>> = (0..n_features)
            .map(|f| examples.iter().map(|e| e.features.values[f]).collect())
            .collect();
        let sorted = cols
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..col.len() as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        Self { cols, sorted }
    }
}

/// Per-feature arrays of in-bag rows, stored column-wise so the split scan
/// touches only values and residuals.
#[derive(Clone)]
struct Lists {
    value: Vec<Vec<f64>>,
    residual: Vec<Vec<f64>>,
    row: Vec<Vec<u32>>,
}

struct SplitChoice {
    feature: usize,
    /// Number of rows (in that feature's order) that go left.
    left_len: usize,
    left_sum: f64,
    threshold: f64,
}

/// Per-feature arrays of in-bag rows in sorted order. Each tree node owns the
/// same contiguous range `start..end` in every feature's array; splitting a
/// node stably partitions that range.
struct TreeBuilder<'a> {
    /// Two copies: a node at depth `d` reads copy `d % 2` and partitions into
    /// the other one for its children.
    lists: [Lists; 2],
    goes_left: Vec<bool>,
    inverse: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn new(n_features: usize, n_rows: usize, bag_size: usize, spec: &RegressorSpec, inverse: &'a [f64]) -> Self {
        let lists = Lists {
            value: vec![vec![0.0; bag_size]; n_features],
            residual: vec![vec![0.0; bag_size]; n_features],
            row: vec![vec![0; bag_size]; n_features],
        };
        Self {
            lists: [lists.clone(), lists],
            goes_left: vec![false; n_rows],
            inverse,
            max_depth: spec.max_depth,
            min_leaf: spec.min_samples_leaf,
            nodes: Vec::new(),
        }
    }

    /// Fit one tree to `residuals` over the rows marked in `in_bag`.
    fn build(&mut self, columns: &Columns, residuals: &[f64], in_bag: &[bool]) -> RegressionTree {
        let lists = &mut self.lists[0];
        for (f, (order, col)) in columns.sorted.iter().zip(&columns.cols).enumerate() {
            let rows = order.iter().filter(|&&r| in_bag[r as usize]);
            let slots = lists.value[f].iter_mut().zip(&mut lists.residual[f]).zip(&mut lists.row[f]);
            for (((value, residual), row), &r) in slots.zip(rows) {
                *value = col[r as usize];
                *residual = residuals[r as usize];
                *row = r;
            }
        }
        let bag = lists.row[0].len();
        let total = lists.residual[0].iter().sum();
        self.grow(0, bag, 0, total);
        RegressionTree {
            nodes: std::mem::take(&mut self.nodes),
        }
    }

    fn best_split(&self, start: usize, end: usize, depth: usize, total: f64) -> Option<SplitChoice> {
        let n = end - start;
        let inv = self.inverse;
        let parent = total * total * inv[n];
        let first = self.min_leaf - 1;
        let last = n - self.min_leaf;
        let mut best: Option<SplitChoice> = None;
        let mut best_gain = 0.0;
        // left_len runs over first + 1..=last; right_len over the reverse.
        let inv_left = &inv[first + 1..=last];
        let inv_right = &inv[n - last..n - first];
        let lists = &self.lists[depth % 2];
        for (feature, (values, residuals)) in lists.value.iter().zip(&lists.residual).enumerate() {
            let (values, residuals) = (&values[start..end], &residuals[start..end]);
            let mut left_sum: f64 = residuals[..first].iter().sum();
            let candidates = values[first..=last]
                .windows(2)
                .zip(&residuals[first..last])
                .zip(inv_left)
                .zip(inv_right.iter().rev())
                .enumerate();
            for (k, (((pair, &r), &il), &ir)) in candidates {
                left_sum += r;
                let (here, next) = (pair[0], pair[1]);
                if !(here < next) {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum * il + right_sum * right_sum * ir - parent;
                if gain > best_gain {
                    best_gain = gain;
                    let mid = here + (next - here) / 2.0;
                    best = Some(SplitChoice {
                        feature,
                        left_len: first + k + 1,
                        left_sum,
                        threshold: if mid < next { mid } else { here },
                    });
                }
            }
        }
        best
    }

    fn leaf(&mut self, total: f64, n: usize) -> usize {
        self.nodes.push(Node::Leaf {
            value: total * self.inverse[n],
        });
        self.nodes.len() - 1
    }

    /// `total` is the residual sum over `start..end`.
    fn grow(&mut self, start: usize, end: usize, depth: usize, total: f64) -> usize {
        let n = end - start;
        let id = self.leaf(total, n);
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(start, end, depth, total) else {
            return id;
        };
        let mid = start + split.left_len;
        let right_sum = total - split.left_sum;

        // Children at the depth limit are leaves and need no reordering.
        let (left, right) = if depth + 1 >= self.max_depth {
            (self.leaf(split.left_sum, split.left_len), self.leaf(right_sum, end - mid))
        } else {
            let [even, odd] = &mut self.lists;
            let (src, dst) = if depth.is_multiple_of(2) { (even, odd) } else { (odd, even) };
            for (pos, &r) in src.row[split.feature][start..end].iter().enumerate() {
                self.goes_left[r as usize] = pos < split.left_len;
            }
            let goes_left = &self.goes_left;
            for f in 0..src.row.len() {
                let (from_row, to_row) = (&src.row[f][start..end], &mut dst.row[f]);
                let (from_value, to_value) = (&src.value[f][start..end], &mut dst.value[f]);
                let (from_res, to_res) = (&src.residual[f][start..end], &mut dst.residual[f]);
                let (mut l, mut r) = (start, mid);
                for ((&row, &value), &res) in from_row.iter().zip(from_value).zip(from_res) {
                    let left = goes_left[row as usize];
                    let at = if left { l } else { r };
                    to_row[at] = row;
                    to_value[at] = value;
                    to_res[at] = res;
                    l += left as usize;
                    r += !left as usize;
                }
            }
            let left = self.grow(start, mid, depth + 1, split.left_sum);
            (left, self.grow(mid, end, depth + 1, right_sum))
        };
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn validate_examples(examples: &[&LabeledExample]) -> Result<usize> {
    if examples.len() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 examples, got {}",
            examples.len()
        )));
    }
    let n_features = examples[0].features.values.len();
    if n_features == 0 {
        return Err(Error::Training("examples have no features".into()));
    }
    for e in examples {
        if e.features.values.len() != n_features {
            return Err(Error::Training(format!(
                "inconsistent feature lengths: {} vs {} (subject {}, window {})",
                n_features,
                e.features.values.len(),
                e.features.subject_id,
                e.features.window_index
            )));
        }
        if !e.target_days.is_finite() || e.features.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite value in subject {} window {}",
                e.features.subject_id, e.features.window_index
            )));
        }
    }
    Ok(n_features)
}

pub fn fit(examples: &[LabeledExample], spec: &RegressorSpec) -> Result<TrainedModel> {
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    fit_refs(&refs, spec)
}

pub fn fit_refs(examples: &[&LabeledExample], spec: &RegressorSpec) -> Result<TrainedModel> {
    fit_traced(examples, spec).map(|(m, _)| m)
}

/// Fit and also return the full-training-set mean squared error after the
/// base prediction and after every boosting stage.
pub fn fit_traced(examples: &[&LabeledExample], spec: &RegressorSpec) -> Result<(TrainedModel, Vec<f64>)> {
    spec.validate()?;
    let n_features = validate_examples(examples)?;
    let n = examples.len();
    let targets: Vec<f64> = examples.iter().map(|e| e.target_days).collect();
    let columns = Columns::new(examples, n_features);

    let base_prediction = stable_mean(&targets);
    let mut fitted = vec![base_prediction; n];
    let mut residuals: Vec<f64> = targets.iter().map(|y| y - base_prediction).collect();
    let mut losses = vec![mean_squared(&residuals)];

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bag_size = ((spec.subsample * n as f64).floor() as usize).clamp(1, n);
    let mut in_bag = vec![true; n];
    let inverse: Vec<f64> = (0..=n).map(|k| 1.0 / k as f64).collect();
    let mut builder = TreeBuilder::new(n_features, n, bag_size, spec, &inverse);
    let mut trees = Vec::with_capacity(spec.n_trees);

    for _ in 0..spec.n_trees {
        if bag_size < n {
            in_bag.fill(false);
            for i in sample(&mut rng, n, bag_size) {
                in_bag[i] = true;
            }
        }
        let tree = builder.build(&columns, &residuals, &in_bag);

        for i in 0..n {
            fitted[i] += spec.learning_rate * tree.predict_by(|f| columns.cols[f][i]);
            residuals[i] = targets[i] - fitted[i];
        }
        losses.push(mean_squared(&residuals));
        trees.push(tree);
    }

    Ok((
        TrainedModel {
            spec: spec.clone(),
            feature_layout_version: UNVERSIONED_LAYOUT.to_string(),
            n_features,
            base_prediction,
            trees,
        },
        losses,
    ))
}

/// Members trained on a seeded partition of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<TrainedModel>,
    /// Member index for each training example, in input order.
    pub subset_assignment: Vec<usize>,
}

/// Shuffle `0..n` with `seed` and deal the positions round-robin into
/// `n_members` subsets.
pub fn partition(n: usize, n_members: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % n_members;
    }
    assignment
}

pub fn fit_ensemble(
    examples: &[LabeledExample],
    spec: &RegressorSpec,
    n_members: usize,
    seed: u64,
) -> Result<Ensemble> {
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    fit_ensemble_refs(&refs, spec, n_members, seed)
}

pub fn fit_ensemble_refs(
    examples: &[&LabeledExample],
    spec: &RegressorSpec,
    n_members: usize,
    seed: u64,
) -> Result<Ensemble> {
    spec.validate()?;
    if n_members < 2 {
        return Err(Error::Training(format!("ensemble needs at least 2 members, got {n_members}")));
    }
    let needed = n_members * spec.min_samples_leaf.max(2);
    if examples.len() < needed {
        return Err(Error::Training(format!(
            "{} examples cannot populate {n_members} members (need at least {needed})",
            examples.len()
        )));
    }
    let subset_assignment = partition(examples.len(), n_members, seed);
    let members = (0..n_members)
        .into_par_iter()
        .map(|u| {
            let subset: Vec<&LabeledExample> = examples
                .iter()
                .zip(&subset_assignment)
                .filter(|(_, &a)| a == u)
                .map(|(e, _)| *e)
                .collect();
            let member_spec = RegressorSpec {
                seed: seed.wrapping_add(u as u64),
                ..spec.clone()
            };
            fit_traced(&subset, &member_spec).map(|(m, _)| m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        members,
        subset_assignment,
    })
}

/// Two-sided 97.5 % Student-t quantile for `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Mean and 95 % t-interval half-width of a sample of member predictions.
pub fn mean_and_ci(predictions: &[f64]) -> (f64, f64) {
    let n = predictions.len();
    let (lo, hi) = predictions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let mean = stable_mean(predictions).clamp(lo, hi);
    if n < 2 || lo == hi {
        return (mean, 0.0);
    }
    let var = predictions.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, t_quantile_975(n - 1) * var.sqrt() / (n as f64).sqrt())
}

impl Ensemble {
    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    pub fn member_predictions(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.predict(values)).collect()
    }

    pub fn with_layout(mut self, layout_version: &str) -> Self {
        for m in &mut self.members {
            m.feature_layout_version = layout_version.to_string();
        }
        self
    }
}

impl Regressor for Ensemble {
    fn n_features(&self) -> usize {
        self.members[0].n_features
    }

    fn predict_unchecked(&self, values: &[f64]) -> f64 {
        let p: Vec<f64> = self.members.iter().map(|m| m.predict_unchecked(values)).collect();
        mean_and_ci(&p).0
    }
}

/// `(mean, ci_halfwidth)` over the member predictions, in days.
pub fn ensemble_predict(ensemble: &Ensemble, values: &[f64]) -> Result<(f64, f64)> {
    Ok(mean_and_ci(&ensemble.member_predictions(values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use rand::Rng;

    pub(crate) fn example(values: Vec<f64>, y: f64) -> LabeledExample {
        LabeledExample {
            features: FeatureVector {
                subject_id: "s".into(),
                window_index: 1,
                day_offset: 0,
                values,
            },
            target_days: y,
        }
    }

    fn linear_data(n: usize, seed: u64) -> Vec<LabeledExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x0: f64 = rng.random();
                let x1: f64 = rng.random();
                example(vec![x0, x1], 2.0 * x0)
            })
            .collect()
    }

    #[test]
    fn constant_target_is_reproduced() {
        let data: Vec<_> = (0..40).map(|i| example(vec![i as f64, (i % 3) as f64], 12.0)).collect();
        let model = fit(&data, &RegressorSpec::default()).unwrap();
        assert_eq!(model.base_prediction, 12.0);
        for e in &data {
            assert_eq!(model.predict(&e.features.values).unwrap(), 12.0);
        }
        assert_eq!(model.predict(&[1e6, -3.0]).unwrap(), 12.0);
        let c = 0.1;
        let data: Vec<_> = (0..40).map(|i| example(vec![i as f64], c)).collect();
        let model = fit(&data, &RegressorSpec::default()).unwrap();
        assert_eq!(model.predict(&[7.0]).unwrap(), c);
    }

    #[test]
    fn learns_linear_target() {
        let data = linear_data(500, 1);
        let spec = RegressorSpec {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            ..Default::default()
        };
        let model = fit(&data, &spec).unwrap();
        let ys: Vec<f64> = data.iter().map(|e| e.target_days).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let std = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
        let mae = data
            .iter()
            .map(|e| (model.predict(&e.features.values).unwrap() - e.target_days).abs())
            .sum::<f64>()
            / data.len() as f64;
        assert!(mae < 0.1 * std, "mae {mae} std {std}");
        let p = model.predict(&[0.3, 0.5]).unwrap();
        assert!((p - 0.6).abs() < 0.15, "prediction {p}");
    }

    #[test]
    fn step_split_found_by_exhaustive_search() {
        // Grid x = 0, 0.01, ..., 0.99; y = 1{x > 0.5}.
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let data: Vec<_> = xs
            .iter()
            .map(|&x| example(vec![x], if x > 0.5 { 1.0 } else { 0.0 }))
            .collect();

        // Oracle: scan every midpoint and keep the lowest-SSE one.
        let sse = |t: f64| {
            let (l, r): (Vec<_>, Vec<_>) = data.iter().partition(|e| e.features.values[0] <= t);
            let part = |s: &Vec<&LabeledExample>| {
                let m = s.iter().map(|e| e.target_days).sum::<f64>() / s.len() as f64;
                s.iter().map(|e| (e.target_days - m).powi(2)).sum::<f64>()
            };
            part(&l) + part(&r)
        };
        let oracle = xs
            .windows(2)
            .map(|p| (p[0] + p[1]) / 2.0)
            .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
            .unwrap();

        let spec = RegressorSpec {
            n_trees: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        };
        let model = fit(&data, &spec).unwrap();
        match model.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!((threshold - oracle).abs() < 1e-12);
                assert!((threshold - 0.5).abs() <= 0.01);
            }
            _ => panic!("expected a split"),
        }
        assert!(model.predict(&[0.2]).unwrap().abs() < 1e-12);
        assert!((model.predict(&[0.8]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_break_to_lowest_feature() {
        // Two identical columns: the split must use feature 0.
        let data: Vec<_> = (0..20)
            .map(|i| example(vec![i as f64, i as f64], if i < 10 { 0.0 } else { 5.0 }))
            .collect();
        let spec = RegressorSpec {
            n_trees: 3,
            subsample: 1.0,
            min_samples_leaf: 1,
            ..Default::default()
        };
        let model = fit(&data, &spec).unwrap();
        assert!(model.trees.iter().flat_map(|t| t.split_features()).all(|f| f == 0));
    }

    #[test]
    fn training_loss_never_increases_without_subsampling() {
        let data = linear_data(300, 4);
        let refs: Vec<&LabeledExample> = data.iter().collect();
        let spec = RegressorSpec {
            n_trees: 50,
            subsample: 1.0,
            ..Default::default()
        };
        let (_, losses) = fit_traced(&refs, &spec).unwrap();
        assert_eq!(losses.len(), 51);
        for p in losses.windows(2) {
            assert!(p[1] <= p[0], "{} -> {}", p[0], p[1]);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let data = linear_data(200, 8);
        let spec = RegressorSpec {
            n_trees: 30,
            seed: 42,
            ..Default::default()
        };
        let a = serde_json::to_string(&fit(&data, &spec).unwrap()).unwrap();
        let b = serde_json::to_string(&fit(&data, &spec).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = RegressorSpec { seed: 43, ..spec };
        assert_ne!(a, serde_json::to_string(&fit(&data, &other).unwrap()).unwrap());
    }

    #[test]
    fn trees_respect_limits() {
        let data = linear_data(200, 3);
        let spec = RegressorSpec {
            n_trees: 20,
            max_depth: 2,
            ..Default::default()
        };
        let model = fit(&data, &spec).unwrap();
        assert!(model.trees.iter().all(|t| t.depth() <= 2));
        assert!(model.trees.iter().flat_map(|t| t.split_features()).all(|f| f < 2));
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = RegressorSpec::default();
        assert!(matches!(fit(&[], &spec), Err(Error::Training(_))));
        assert!(fit(&[example(vec![1.0], 1.0)], &spec).is_err());
        let mixed = vec![example(vec![1.0], 1.0), example(vec![1.0, 2.0], 2.0)];
        assert!(matches!(fit(&mixed, &spec), Err(Error::Training(_))));
        let bad = RegressorSpec {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(fit(&linear_data(10, 0), &bad), Err(Error::Config(_))));
    }

    #[test]
    fn predict_checks_layout() {
        let model = fit(&linear_data(50, 2), &RegressorSpec::default()).unwrap();
        assert!(matches!(model.predict(&[1.0]), Err(Error::LayoutMismatch(_))));
        let x = [0.4, 0.1];
        assert_eq!(
            model.predict(&x).unwrap().to_bits(),
            model.predict(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn partition_is_exact() {
        let a = partition(100, 10, 7);
        let mut sizes = [0usize; 10];
        for &m in &a {
            sizes[m] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 10));
        assert_eq!(a, partition(100, 10, 7));
        assert_ne!(a, partition(100, 10, 8));
        for n in 10..60 {
            let a = partition(n, 10, n as u64);
            let mut sizes = [0usize; 10];
            a.iter().for_each(|&m| sizes[m] += 1);
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            assert_eq!(sizes.iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn ensemble_needs_enough_examples() {
        let spec = RegressorSpec {
            min_samples_leaf: 1,
            ..Default::default()
        };
        assert!(matches!(
            fit_ensemble(&linear_data(9, 0), &spec, 10, 0),
            Err(Error::Training(_))
        ));
        let ens = fit_ensemble(&linear_data(100, 0), &RegressorSpec { n_trees: 5, ..spec }, 10, 0).unwrap();
        assert_eq!(ens.n_members(), 10);
        assert_eq!(ens.members[3].spec.seed, 3);
    }

    #[test]
    fn t_interval_by_hand() {
        let p = [18.0, 19.0, 20.0, 21.0, 22.0, 18.0, 19.0, 20.0, 21.0, 22.0];
        let (mean, hw) = mean_and_ci(&p);
        assert_eq!(mean, 20.0);
        // s^2 = 20 / 9; t(0.975, 9) = 2.2621571627982
        let expect = 2.2621571627982 * (20.0f64 / 9.0).sqrt() / 10f64.sqrt();
        assert!((hw - expect).abs() < 1e-6, "{hw} vs {expect}");
        assert!((hw - 1.07).abs() < 0.005);
        assert_eq!(mean_and_ci(&[20.0; 10]), (20.0, 0.0));
    }

    #[test]
    fn t_quantile_table_values() {
        assert!((t_quantile_975(9) - 2.262157).abs() < 1e-6);
        assert!((t_quantile_975(1) - 12.706205).abs() < 1e-5);
    }
}
