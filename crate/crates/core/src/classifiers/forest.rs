use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, predict};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `⌈√dim⌉`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 16,
            min_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

/// One node of a tree stored in preorder: a split's left subtree starts at
/// the next index, its right subtree at `right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, right: usize },
    /// `[p(clean), p(defective)]`.
    Leaf { proba: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// `p(defective)`; samples with `x[feature] <= threshold` go left.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { proba } => return proba[1],
                TreeNode::Split { feature, threshold, right } => {
                    i = if x[*feature] <= *threshold { i + 1 } else { *right };
                }
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        // Walks the preorder layout once: every subtree must end exactly
        // where its sibling begins.
        let mut stack = vec![0usize];
        let mut next = 0usize;
        while let Some(i) = stack.pop() {
            if i != next || i >= self.nodes.len() {
                return Err(Error::schema("forest", "tree nodes are not in preorder"));
            }
            next += 1;
            match &self.nodes[i] {
                TreeNode::Leaf { proba } => {
                    if proba.iter().any(|p| !(0.0..=1.0).contains(p)) || (proba[0] + proba[1] - 1.0).abs() > 1e-9 {
                        return Err(Error::schema("forest", "leaf probabilities must sum to 1"));
                    }
                }
                TreeNode::Split { feature, threshold, right } => {
                    if *feature >= dim || !threshold.is_finite() || *right <= i + 1 {
                        return Err(Error::schema("forest", format!("invalid split at node {i}")));
                    }
                    stack.push(*right);
                    stack.push(i + 1);
                }
            }
        }
        if next != self.nodes.len() {
            return Err(Error::schema("forest", "unreachable tree nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub dim: usize,
}

impl ForestModel {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() || self.trees.len() != self.n_trees {
            return Err(Error::schema("forest", "tree count does not match n_trees"));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.dim))
    }
}

pub fn predict_proba_forest(model: &ForestModel, x: &[f64]) -> f64 {
    model.predict_proba(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestFit {
    pub model: ForestModel,
    /// Accuracy over samples left out of at least one bootstrap.
    pub oob_accuracy: Option<f64>,
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [bool],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
    nodes: Vec<TreeNode>,
}

/// Summed child impurity `Σ n_side·gini_side`; rational in the counts, so
/// equal splits compare equal.
fn weighted_gini(pos_l: usize, n_l: usize, pos_r: usize, n_r: usize) -> f64 {
    let side = |p: usize, n: usize| {
        let (p, n) = (p as f64, n as f64);
        let q = n - p;
        n - (p * p + q * q) / n
    };
    side(pos_l, n_l) + side(pos_r, n_r)
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) {
        let pos = idx.iter().filter(|&&i| self.y[i]).count() as f64;
        let n = idx.len() as f64;
        self.nodes.push(TreeNode::Leaf {
            proba: [(n - pos) / n, pos / n],
        });
    }

    fn best_split(&self, idx: &[usize], rng: &mut StreamRng) -> Option<(usize, f64)> {
        let dim = self.x[0].len();
        let mut features = sample(rng, dim, self.mtry.min(dim)).into_vec();
        features.sort_unstable();
        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in features {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut pos_l = 0;
            for s in 0..n - 1 {
                pos_l += usize::from(pairs[s].1);
                let (lo, hi) = (pairs[s].0, pairs[s + 1].0);
                let n_l = s + 1;
                if lo == hi || n_l < self.min_leaf || n - n_l < self.min_leaf {
                    continue;
                }
                let imp = weighted_gini(pos_l, n_l, total_pos - pos_l, n - n_l);
                if best.map_or(true, |(b, _, _)| imp < b) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((imp, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut StreamRng) {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if pos == 0 || pos == idx.len() || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return self.leaf(&idx);
        }
        let Some((feature, threshold)) = self.best_split(&idx, rng) else {
            return self.leaf(&idx);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split {
            feature,
            threshold,
            right: 0,
        });
        self.grow(left, depth + 1, rng);
        let right_at = self.nodes.len();
        if let TreeNode::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(right, depth + 1, rng);
    }
}

/// Bagged Gini trees. Tree `i` draws its bootstrap and feature subsets from
/// its own stream, so the forest does not depend on thread count.
pub fn train_forest(x: &[&[f64]], y: &[Label], config: &ForestConfig) -> Result<ForestFit> {
    check_training_set(x, y)?;
    if config.n_trees == 0 || config.max_depth == 0 || config.min_leaf == 0 {
        return Err(Error::Config("n_trees, max_depth and min_leaf must be at least 1".into()));
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::Input("forest needs at least one feature".into()));
    }
    let mtry = config
        .features_per_split
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .clamp(1, dim);
    let yb: Vec<bool> = y.iter().map(|l| l.is_defective()).collect();
    let n = x.len();
    let base = rng::derive_seed(config.seed, "bootstrap");
    let grown: Vec<(DecisionTree, Vec<bool>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(base, &format!("tree-{t}"));
            let mut in_bag = vec![false; n];
            let idx: Vec<usize> = (0..n)
                .map(|_| {
                    let i = r.gen_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let mut b = Builder {
                x,
                y: &yb,
                max_depth: config.max_depth,
                min_leaf: config.min_leaf,
                mtry,
                nodes: Vec::new(),
            };
            b.grow(idx, 0, &mut r);
            (DecisionTree { nodes: b.nodes }, in_bag)
        })
        .collect();

    let (mut correct, mut counted) = (0usize, 0usize);
    for (i, xi) in x.iter().enumerate() {
        let votes: Vec<f64> = grown
            .iter()
            .filter(|(_, bag)| !bag[i])
            .map(|(t, _)| t.predict_proba(xi))
            .collect();
        if votes.is_empty() {
            continue;
        }
        counted += 1;
        let p = votes.iter().sum::<f64>() / votes.len() as f64;
        correct += usize::from(predict(p) == y[i]);
    }
    let model = ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        n_trees: config.n_trees,
        max_depth: config.max_depth,
        seed: config.seed,
        dim,
    };
    Ok(ForestFit {
        model,
        oob_accuracy: (counted > 0).then(|| correct as f64 / counted as f64),
    })
}
