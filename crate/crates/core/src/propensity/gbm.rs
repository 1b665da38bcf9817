//! Stagewise gradient boosting of shallow regression trees on the Bernoulli
//! deviance, with the number of trees chosen by covariate balance.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::balancers::weights::weights_from_propensity;
use crate::error::{Error, Result};
use crate::estimator::{es_mean, smd_scale, SmdDenominator};
use crate::linalg::{expit, log1p_exp, logit};
use crate::propensity::{clamp_ps, PropensityModel};
use crate::types::{group_sizes, Estimand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmParams {
    pub max_trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Minimum number of (in-bag) observations in every terminal node.
    pub min_node: usize,
    /// Fraction of units drawn without replacement for each tree.
    pub subsample: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams { max_trees: 5000, depth: 3, shrinkage: 0.01, min_node: 10, subsample: 1.0 }
    }
}

impl GbmParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("gbm depth must be at least 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config(format!("gbm shrinkage must be in (0,1], got {}", self.shrinkage)));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("gbm subsample must be in (0,1], got {}", self.subsample)));
        }
        if self.min_node == 0 || self.min_node > n {
            return Err(Error::Config(format!("gbm min_node {} must be in 1..={n}", self.min_node)));
        }
        Ok(())
    }
}

/// Largest magnitude of a terminal-node Newton value.
pub const MAX_LEAF_VALUE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[(i, feature)] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// `(feature, threshold)` of the root split, if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(&TreeNode::Split { feature, threshold, .. }) => Some((feature, threshold)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    /// Logit of the training prevalence.
    pub init_score: f64,
    pub trees: Vec<RegressionTree>,
    pub shrinkage: f64,
    /// Number of leading trees used for prediction.
    pub best_iteration: usize,
    /// Mean Bernoulli deviance on the training data after 0, 1, … trees.
    pub train_deviance: Vec<f64>,
    /// Training prevalence, returned as-is by the zero-tree ensemble.
    prevalence: f64,
    n_features: usize,
}

impl TreeEnsemble {
    fn check_features(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, found: x.ncols() });
        }
        Ok(())
    }

    /// Log-odds using the first `iterations` trees.
    pub fn decision_function(&self, x: &DMatrix<f64>, iterations: usize) -> Result<Vec<f64>> {
        self.check_features(x)?;
        let k = iterations.min(self.trees.len());
        Ok((0..x.nrows())
            .map(|i| self.init_score + self.shrinkage * self.trees[..k].iter().map(|t| t.predict_row(x, i)).sum::<f64>())
            .collect())
    }

    pub fn predict_ps_at(&self, x: &DMatrix<f64>, iterations: usize) -> Result<Vec<f64>> {
        if iterations == 0 || self.trees.is_empty() {
            self.check_features(x)?;
            return Ok(vec![clamp_ps(self.prevalence); x.nrows()]);
        }
        Ok(self.decision_function(x, iterations)?.into_iter().map(|e| clamp_ps(expit(e))).collect())
    }
}

impl PropensityModel for TreeEnsemble {
    fn predict_ps(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.predict_ps_at(x, self.best_iteration)
    }
}

fn mean_deviance(eta: &[f64], t: &[bool]) -> f64 {
    let s: f64 = eta.iter().zip(t).map(|(&e, &ti)| log1p_exp(e) - if ti { e } else { 0.0 }).sum();
    2.0 * s / eta.len() as f64
}

const NO_NODE: usize = usize::MAX;

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Per-feature unit orders and sorted values, shared by every tree.
struct Presorted {
    order: Vec<Vec<usize>>,
    sorted: Vec<Vec<f64>>,
    /// `recip[c] = 1 / c`.
    recip: Vec<f64>,
}

impl Presorted {
    fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let order: Vec<Vec<usize>> = (0..x.ncols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
                idx
            })
            .collect();
        let sorted = order.iter().enumerate().map(|(f, ord)| ord.iter().map(|&i| x[(i, f)]).collect()).collect();
        let recip = (0..=n).map(|c| if c == 0 { 0.0 } else { 1.0 / c as f64 }).collect();
        Presorted { order, sorted, recip }
    }
}

struct Scan {
    count: usize,
    total: f64,
    parent: f64,
    left_count: usize,
    left_sum: f64,
    last_value: f64,
    best: Option<BestSplit>,
}

impl Scan {
    fn new(count: usize, total: f64) -> Self {
        let parent = if count > 0 { total * total / count as f64 } else { 0.0 };
        Scan { count, total, parent, left_count: 0, left_sum: 0.0, last_value: f64::NAN, best: None }
    }

    fn rewind(&mut self) {
        self.left_count = 0;
        self.left_sum = 0.0;
        self.last_value = f64::NAN;
    }
}

/// Grows one least-squares regression tree on `resid` over the in-bag
/// units, level by level, using the presorted feature orders.
fn grow_tree(
    x: &DMatrix<f64>,
    pre: &Presorted,
    in_bag: &[bool],
    resid: &[f64],
    curvature: &[f64],
    params: &GbmParams,
) -> RegressionTree {
    let n = x.nrows();
    let mut node_of: Vec<usize> = in_bag.iter().map(|&b| if b { 0 } else { NO_NODE }).collect();
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    let mut frontier = vec![0usize];

    for _ in 0..params.depth {
        // Per-node totals over the in-bag units.
        let mut count = vec![0usize; nodes.len()];
        let mut total = vec![0.0; nodes.len()];
        for i in 0..n {
            if node_of[i] != NO_NODE {
                count[node_of[i]] += 1;
                total[node_of[i]] += resid[i];
            }
        }
        let mut splittable = vec![false; nodes.len()];
        for &k in &frontier {
            splittable[k] = count[k] >= 2 * params.min_node;
        }
        if !splittable.iter().any(|&s| s) {
            break;
        }

        // Scan state per node; units outside splittable nodes get no slot.
        let mut scans: Vec<Scan> = (0..nodes.len()).map(|k| Scan::new(count[k], total[k])).collect();
        let unit: Vec<(usize, f64)> = node_of
            .iter()
            .zip(resid)
            .map(|(&k, &r)| (if k != NO_NODE && splittable[k] { k } else { NO_NODE }, r))
            .collect();
        for (f, (ord, vals)) in pre.order.iter().zip(&pre.sorted).enumerate() {
            scans.iter_mut().for_each(Scan::rewind);
            for (&i, &v) in ord.iter().zip(vals) {
                let (k, r) = unit[i];
                let Some(sc) = scans.get_mut(k) else { continue };
                let nl = sc.left_count;
                let nr = sc.count - nl;
                if nl >= params.min_node && nr >= params.min_node && v > sc.last_value {
                    let sl = sc.left_sum;
                    let sr = sc.total - sl;
                    let gain = sl * sl * pre.recip[nl] + sr * sr * pre.recip[nr] - sc.parent;
                    if gain > 1e-14 && sc.best.is_none_or(|b| gain > b.gain) {
                        sc.best = Some(BestSplit { gain, feature: f, threshold: 0.5 * (sc.last_value + v) });
                    }
                }
                sc.left_count += 1;
                sc.left_sum += r;
                sc.last_value = v;
            }
        }
        let best: Vec<Option<BestSplit>> = scans.iter().map(|sc| sc.best).collect();

        let mut next_frontier = Vec::new();
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; nodes.len()];
        for &k in &frontier {
            if let Some(b) = best[k] {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes[k] = TreeNode::Split { feature: b.feature, threshold: b.threshold, left, right };
                child_of[k] = Some((left, right, b.feature, b.threshold));
                next_frontier.extend([left, right]);
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        for i in 0..n {
            let k = node_of[i];
            if k != NO_NODE {
                if let Some((left, right, f, thr)) = child_of[k] {
                    node_of[i] = if x[(i, f)] < thr { left } else { right };
                }
            }
        }
        frontier = next_frontier;
    }

    // Newton values on each terminal node.
    let mut num = vec![0.0; nodes.len()];
    let mut den = vec![0.0; nodes.len()];
    for i in 0..n {
        if node_of[i] != NO_NODE {
            num[node_of[i]] += resid[i];
            den[node_of[i]] += curvature[i];
        }
    }
    for (k, node) in nodes.iter_mut().enumerate() {
        if let TreeNode::Leaf { value } = node {
            *value = if den[k] > 0.0 { (num[k] / den[k]).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE) } else { 0.0 };
        }
    }
    RegressionTree { nodes }
}

/// Fits up to `params.max_trees` trees. `best_iteration` is initialised to
/// the number of trees; use [`select_iteration`] to choose it by balance.
pub fn fit_gbm<R: Rng + ?Sized>(x: &DMatrix<f64>, t: &[bool], params: &GbmParams, rng: &mut R) -> Result<TreeEnsemble> {
    let n = x.nrows();
    if t.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: t.len() });
    }
    let (n_t, _) = group_sizes(t)?;
    params.validate(n)?;

    let init_score = logit(n_t as f64 / n as f64);
    let pre = Presorted::new(x);
    let bag_size = ((params.subsample * n as f64).floor() as usize).max(1);

    let mut eta = vec![init_score; n];
    let mut train_deviance = Vec::with_capacity(params.max_trees + 1);
    train_deviance.push(mean_deviance(&eta, t));
    let mut trees = Vec::with_capacity(params.max_trees);
    let mut resid = vec![0.0; n];
    let mut curvature = vec![0.0; n];
    let mut in_bag = vec![true; n];

    for _ in 0..params.max_trees {
        for i in 0..n {
            let p = expit(eta[i]);
            resid[i] = f64::from(u8::from(t[i])) - p;
            curvature[i] = p * (1.0 - p);
        }
        if bag_size < n {
            in_bag.iter_mut().for_each(|b| *b = false);
            for i in sample(rng, n, bag_size) {
                in_bag[i] = true;
            }
        }
        let tree = grow_tree(x, &pre, &in_bag, &resid, &curvature, params);
        for (i, e) in eta.iter_mut().enumerate() {
            *e += params.shrinkage * tree.predict_row(x, i);
        }
        train_deviance.push(mean_deviance(&eta, t));
        trees.push(tree);
    }

    Ok(TreeEnsemble {
        init_score,
        best_iteration: trees.len(),
        trees,
        shrinkage: params.shrinkage,
        train_deviance,
        prevalence: n_t as f64 / n as f64,
        n_features: x.ncols(),
    })
}

fn balance_denominator(estimand: Estimand) -> SmdDenominator {
    match estimand {
        Estimand::Att => SmdDenominator::TreatedSd,
        Estimand::Ate => SmdDenominator::PooledSd,
    }
}

/// Iterations at which the balance criterion is evaluated: every k-th,
/// k = max(trees / 100, 1), starting from 0.
pub fn iteration_grid(n_trees: usize) -> Vec<usize> {
    let k = (n_trees / 100).max(1);
    (0..=n_trees).step_by(k).collect()
}

/// Mean absolute standardized mean difference at each grid iteration.
/// Columns with zero reference spread cannot be assessed and are skipped.
pub fn balance_path(ens: &TreeEnsemble, x: &DMatrix<f64>, t: &[bool], estimand: Estimand) -> Result<Vec<(usize, f64)>> {
    ens.check_features(x)?;
    let denom = balance_denominator(estimand);
    let columns: Vec<Vec<f64>> = x
        .column_iter()
        .map(|c| c.iter().copied().collect::<Vec<f64>>())
        .filter(|c| smd_scale(c, t, denom).is_ok())
        .collect();
    if columns.is_empty() {
        return Ok(vec![(0, 0.0)]);
    }

    let grid = iteration_grid(ens.trees.len());
    let mut eta = vec![ens.init_score; x.nrows()];
    let mut done = 0;
    let mut path = Vec::with_capacity(grid.len());
    for &it in &grid {
        for tree in &ens.trees[done..it] {
            for (i, e) in eta.iter_mut().enumerate() {
                *e += ens.shrinkage * tree.predict_row(x, i);
            }
        }
        done = it;
        let ps: Vec<f64> = if it == 0 { ens.predict_ps_at(x, 0)? } else { eta.iter().map(|&e| clamp_ps(expit(e))).collect() };
        let w = weights_from_propensity(&ps, t, estimand)?;
        path.push((it, es_mean(&columns, t, &w, denom)?));
    }
    Ok(path)
}

/// Grid iteration minimising the balance criterion; ties go to fewer trees.
pub fn select_iteration(ens: &TreeEnsemble, x: &DMatrix<f64>, t: &[bool], estimand: Estimand) -> Result<usize> {
    let path = balance_path(ens, x, t, estimand)?;
    let mut best = path[0];
    for &(it, v) in &path[1..] {
        if v < best.1 {
            best = (it, v);
        }
    }
    Ok(best.0)
}
