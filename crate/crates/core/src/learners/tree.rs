//! Histogram CART building block shared by the forest and boosting learners.
//!
//! Splits are scored with the second-order gain
//! `G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)` (halved, minus
//! the minimum split gain) and leaves take `-G/(H+lambda)`. With `g = -y`,
//! `h = 1` and `lambda = 0` this is ordinary variance-reduction CART.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;

/// At most this many bins per feature; features with fewer distinct values
/// are split exactly.
pub(crate) const MAX_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        #[serde(skip)]
        bin: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub depth: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub(crate) fn predict_binned(&self, data: &BinnedData, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature, left, right, bin, ..
                } => i = if data.bin(row, *feature) as usize <= *bin { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { value } => Some(*value),
            _ => None,
        })
    }
}

/// Feature matrix quantized to per-feature bins.
#[derive(Debug, Clone)]
pub(crate) struct BinnedData {
    pub n_features: usize,
    /// Row-major: `bins[row * n_features + feature]`.
    pub bins: Vec<u8>,
    /// `thresholds[feature][b]` separates bin `b` from bin `b + 1`.
    pub thresholds: Vec<Vec<f64>>,
    /// Start of each feature's block in a flat histogram.
    offsets: Vec<usize>,
}

impl BinnedData {
    pub fn new(x: &FeatureMatrix) -> Self {
        let n_cols = x.n_cols();
        let n_rows = x.n_rows();
        let mut bins = vec![0u8; n_rows * n_cols];
        let mut thresholds = Vec::with_capacity(n_cols);
        for c in 0..n_cols {
            let col = x.column(c);
            let mut uniq = col.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let cuts: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect()
            } else {
                let m = uniq.len();
                let mut idx: Vec<usize> = (1..MAX_BINS).map(|i| i * m / MAX_BINS - 1).collect();
                idx.dedup();
                idx.into_iter().map(|i| midpoint(uniq[i], uniq[i + 1])).collect()
            };
            for (r, &v) in col.iter().enumerate() {
                bins[r * n_cols + c] = cuts.partition_point(|&t| t < v) as u8;
            }
            thresholds.push(cuts);
        }
        let mut offsets = Vec::with_capacity(n_cols + 1);
        offsets.push(0);
        for t in &thresholds {
            offsets.push(offsets.last().unwrap() + t.len() + 1);
        }
        BinnedData {
            n_features: n_cols,
            bins,
            thresholds,
            offsets,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn bin(&self, row: usize, feature: usize) -> u8 {
        self.bins[row * self.n_features + feature]
    }

    #[cfg(test)]
    fn column_bins(&self, feature: usize) -> Vec<u8> {
        (0..self.bins.len() / self.n_features.max(1))
            .map(|r| self.bin(r, feature))
            .collect()
    }

    fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    fn total_bins(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Guard against rounding up to `b` for adjacent floats.
    if m >= b {
        a
    } else {
        m
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub min_split_gain: f64,
    /// Share of features examined at each node.
    pub feature_fraction: f64,
}

struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

#[derive(Default, Clone, Copy)]
struct BinStat {
    g: f64,
    h: f64,
    n: usize,
}

/// Grows one tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
pub(crate) fn build_tree<R: Rng>(
    data: &BinnedData,
    rows: Vec<usize>,
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
    rng: &mut R,
) -> RegressionTree {
    let n_features = data.n_features();
    let n_sampled = ((params.feature_fraction * n_features as f64).ceil() as usize).clamp(1, n_features.max(1));
    let mut hist = vec![BinStat::default(); data.total_bins()];
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut depth = 0;
    // (node index, rows, depth)
    let mut stack = vec![(0usize, rows, 0usize)];
    nodes.push(TreeNode::Leaf { value: 0.0 });

    while let Some((node, rows, d)) = stack.pop() {
        depth = depth.max(d);
        let (g_sum, h_sum) = rows.iter().fold((0.0, 0.0), |(g, h), &r| (g + grad[r], h + hess[r]));
        let leaf_value = -g_sum / (h_sum + params.lambda);
        let can_split = params.max_depth.is_none_or(|m| d < m) && rows.len() >= 2 * params.min_samples_leaf;
        let best = if can_split && n_features > 0 {
            let features: Vec<usize> = if n_sampled == n_features {
                (0..n_features).collect()
            } else {
                let mut f = index::sample(rng, n_features, n_sampled).into_vec();
                f.sort_unstable();
                f
            };
            best_split(data, &rows, grad, hess, g_sum, h_sum, &features, params, &mut hist)
        } else {
            None
        };
        match best {
            Some(c) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| data.bin(r, c.feature) as usize <= c.bin);
                let left = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes[node] = TreeNode::Split {
                    feature: c.feature,
                    threshold: data.thresholds[c.feature][c.bin],
                    left,
                    right,
                    bin: c.bin,
                };
                // Right first so the left subtree is expanded first.
                stack.push((right, right_rows, d + 1));
                stack.push((left, left_rows, d + 1));
            }
            None => nodes[node] = TreeNode::Leaf { value: leaf_value },
        }
    }
    RegressionTree { nodes, depth }
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    data: &BinnedData,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    g_sum: f64,
    h_sum: f64,
    features: &[usize],
    params: &TreeParams,
    hist: &mut [BinStat],
) -> Option<Candidate> {
    let parent_score = g_sum * g_sum / (h_sum + params.lambda);
    // Below this a "gain" is rounding noise.
    let tol = 1e-12 * parent_score.abs().max(1e-300);
    let min_leaf = params.min_samples_leaf.max(1);
    let mut best: Option<Candidate> = None;
    let features: Vec<usize> = features.iter().copied().filter(|&f| data.n_bins(f) >= 2).collect();
    for &f in &features {
        hist[data.offsets[f]..data.offsets[f + 1]].fill(BinStat::default());
    }
    let nf = data.n_features;
    for &r in rows {
        let (g, h) = (grad[r], hess[r]);
        let row = &data.bins[r * nf..(r + 1) * nf];
        for &f in &features {
            let s = &mut hist[data.offsets[f] + row[f] as usize];
            s.g += g;
            s.h += h;
            s.n += 1;
        }
    }
    for &f in &features {
        let n_bins = data.n_bins(f);
        let hist = &hist[data.offsets[f]..data.offsets[f + 1]];
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for (b, s) in hist[..n_bins - 1].iter().enumerate() {
            gl += s.g;
            hl += s.h;
            nl += s.n;
            if s.n == 0 || nl < min_leaf {
                continue;
            }
            let nr = rows.len() - nl;
            if nr < min_leaf {
                break;
            }
            let gr = g_sum - gl;
            let hr = h_sum - hl;
            let gain = 0.5 * (gl * gl / (hl + params.lambda) + gr * gr / (hr + params.lambda) - parent_score)
                - params.min_split_gain;
            if gain > tol && best.as_ref().is_none_or(|c| gain > c.gain) {
                best = Some(Candidate { gain, feature: f, bin: b });
            }
        }
    }
    best
}
