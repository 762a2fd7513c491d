//! Random-forest regression: 20 trees, depth ≤ 25, bootstrap resamples.
//!
//! Splits minimize the summed squared deviation of the two children
//! (variance reduction). Every feature is considered at every node;
//! candidate thresholds are midpoints between consecutive distinct
//! sorted values. Everything is deterministic given the seed; per-tree
//! outputs are summed in sorted order so the forest average is exactly
//! invariant to tree order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const TREE_COUNT: usize = 20;
pub const MAX_DEPTH: usize = 25;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TreeNode {
    /// Mean target of the training samples that reached this leaf.
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left, the rest right.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tree {
    /// Node arena; index 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub seed: u64,
}

impl ForestModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut outs: Vec<f64> = self.trees.iter().map(|t| t.predict_row(row)).collect();
        // Sorted summation: the average is bit-identical under any
        // permutation of the trees.
        outs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        outs.iter().sum::<f64>() / outs.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if self.trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        Ok((0..x.rows()).map(|r| self.predict_row(x.row(r))).collect())
    }
}

/// Best split of `rows` on one feature, as (score, threshold). The score
/// is the summed squared deviation of both children; lower is better.
fn best_split_on_feature(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    feature: usize,
) -> Option<(f64, f64)> {
    let mut vals: Vec<(f64, f64)> = rows
        .iter()
        .map(|&r| (x.get(r, feature), y[r]))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = vals.len();
    let total_sum: f64 = vals.iter().map(|v| v.1).sum();
    let total_sq: f64 = vals.iter().map(|v| v.1 * v.1).sum();

    let mut best: Option<(f64, f64)> = None;
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    for i in 0..n - 1 {
        left_sum += vals[i].1;
        left_sq += vals[i].1 * vals[i].1;
        if vals[i].0 == vals[i + 1].0 {
            continue; // No boundary between equal values.
        }
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let right_sum = total_sum - left_sum;
        let right_sq = total_sq - left_sq;
        let score = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        let threshold = 0.5 * (vals[i].0 + vals[i + 1].0);
        if best.map_or(true, |(s, _)| score < s) {
            best = Some((score, threshold));
        }
    }
    best
}

fn grow(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64;
    let homogeneous = rows.iter().all(|&r| y[r] == y[rows[0]]);
    if depth >= MAX_DEPTH || rows.len() < 2 || homogeneous {
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    }

    // Scan every feature; ties keep the lowest feature index.
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..x.cols() {
        if let Some((score, threshold)) = best_split_on_feature(x, y, rows, feature) {
            if best.map_or(true, |(s, _, _)| score < s) {
                best = Some((score, feature, threshold));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        // All features constant on these rows.
        nodes.push(TreeNode::Leaf { value: mean });
        return nodes.len() - 1;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| x.get(r, feature) <= threshold);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

    let placeholder = nodes.len();
    nodes.push(TreeNode::Leaf { value: mean });
    let left = grow(x, y, &left_rows, depth + 1, nodes);
    let right = grow(x, y, &right_rows, depth + 1, nodes);
    nodes[placeholder] = TreeNode::Split {
        feature,
        threshold,
        left,
        right,
    };
    placeholder
}

/// Fits the 20-tree forest. Deterministic given the seed: tree t draws
/// its bootstrap from a stream seeded by (seed, t).
pub fn fit_random_forest(x: &Matrix, y: &[f64], seed: u64) -> Result<ForestModel> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "feature rows ({}) and targets ({}) differ",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::invalid("forest needs at least 2 samples"));
    }
    let n = x.rows();
    let mut trees = Vec::with_capacity(TREE_COUNT);
    for t in 0..TREE_COUNT {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut nodes = Vec::new();
        grow(x, y, &rows, 0, &mut nodes);
        trees.push(Tree { nodes });
    }
    Ok(ForestModel { trees, seed })
}
