//! CART classifier (Gini impurity) mimicking the model's decisions from
//! rule-support counts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcn::ActivationMatrix;
use crate::miner::ActivationRule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_leaf: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        class: u8,
        samples: usize,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionTree {
    pub root: TreeNode,
}

fn gini(ones: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ones as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl DecisionTree {
    pub fn fit(x: &[Vec<f64>], y: &[u8], params: TreeParams) -> Self {
        let idx: Vec<usize> = (0..y.len()).collect();
        DecisionTree {
            root: grow(x, y, idx, 0, params),
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[u8]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let hits = x.iter().zip(y).filter(|(r, &c)| self.predict(r) == c).count();
        hits as f64 / y.len() as f64
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &TreeNode) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }
}

fn grow(x: &[Vec<f64>], y: &[u8], idx: Vec<usize>, depth: usize, params: TreeParams) -> TreeNode {
    let n = idx.len();
    let ones = idx.iter().filter(|&&i| y[i] == 1).count();
    let leaf = TreeNode::Leaf {
        class: u8::from(ones * 2 > n),
        samples: n,
    };
    if depth >= params.max_depth || ones == 0 || ones == n || n < 2 * params.min_leaf.max(1) {
        return leaf;
    }
    let parent = gini(ones, n);
    let features = x.first().map_or(0, Vec::len);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.clone();
    for f in 0..features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_ones = 0;
        for i in 0..n - 1 {
            left_ones += usize::from(y[order[i]] == 1);
            let (lo, hi) = (x[order[i]][f], x[order[i + 1]][f]);
            let nl = i + 1;
            if lo == hi || nl < params.min_leaf || n - nl < params.min_leaf {
                continue;
            }
            let score = (nl as f64 * gini(left_ones, nl) + (n - nl) as f64 * gini(ones - left_ones, n - nl)) / n as f64;
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, f, 0.5 * (lo + hi)));
            }
        }
    }
    let Some((_, feature, threshold)) = best.filter(|&(s, _, _)| s < parent) else {
        return leaf;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, left, depth + 1, params)),
        right: Box::new(grow(x, y, right, depth + 1, params)),
    }
}

/// `features[g][r]` = number of nodes of graph `g` activating rule `r`;
/// `acts[l - 1]` is the layer-`l` matrix.
pub fn rule_count_features(rules: &[ActivationRule], acts: &[ActivationMatrix]) -> Result<Vec<Vec<f64>>> {
    let graphs = acts.first().map_or(0, ActivationMatrix::graph_count);
    let mut out = vec![Vec::with_capacity(rules.len()); graphs];
    for rule in rules {
        let act = acts.get(rule.layer.wrapping_sub(1)).ok_or(Error::LayerOutOfRange {
            layer: rule.layer,
            layers: acts.len(),
        })?;
        let bits = rule.bits();
        for (g, row) in out.iter_mut().enumerate() {
            row.push(act.activating_nodes(g, bits).len() as f64);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MimicResult {
    pub tree: DecisionTree,
    pub train_size: usize,
    pub test_size: usize,
    pub train_accuracy: f64,
    /// `None` when the held-out split is empty.
    pub test_accuracy: Option<f64>,
}

/// Fits a tree on a seeded `train_fraction` split of the graphs, predicting
/// the model's decision from rule-support counts.
pub fn mimic_tree(
    rules: &[ActivationRule],
    acts: &[ActivationMatrix],
    train_fraction: f64,
    seed: u64,
    params: TreeParams,
) -> Result<MimicResult> {
    if rules.is_empty() {
        return Err(Error::InvalidParameter("the mimic tree needs at least one rule".into()));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} outside (0, 1]")));
    }
    let x = rule_count_features(rules, acts)?;
    let y = acts[0].decisions().to_vec();
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((y.len() as f64 * train_fraction).round() as usize).clamp(1, y.len());
    let pick = |ids: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) {
        (ids.iter().map(|&i| x[i].clone()).collect(), ids.iter().map(|&i| y[i]).collect())
    };
    let (train_x, train_y) = pick(&order[..n_train]);
    let (test_x, test_y) = pick(&order[n_train..]);
    let tree = DecisionTree::fit(&train_x, &train_y, params);
    Ok(MimicResult {
        train_accuracy: tree.accuracy(&train_x, &train_y),
        test_accuracy: (!test_y.is_empty()).then(|| tree.accuracy(&test_x, &test_y)),
        train_size: train_y.len(),
        test_size: test_y.len(),
        tree,
    })
}
