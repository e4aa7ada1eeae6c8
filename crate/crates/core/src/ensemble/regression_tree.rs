use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressionNode {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Least-squares CART tree with scalar leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                RegressionNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }

    pub fn map_leaves(&mut self, f: impl Fn(f64) -> f64) {
        for node in &mut self.nodes {
            if let RegressionNode::Leaf { value } = node {
                *value = f(*value);
            }
        }
    }
}

/// Per-feature orderings of the training rows, shared across boosting stages.
pub(crate) struct Presorted {
    pub order: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: ArrayView2<'_, f64>) -> Self {
        let order = (0..x.ncols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.nrows()).collect();
                idx.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Frontier {
    node: usize,
    sum: f64,
    count: usize,
}

/// Grows a tree level by level using only rows with `in_sample[i]` set.
pub(crate) fn fit_regression_tree(
    x: ArrayView2<'_, f64>,
    presorted: &Presorted,
    target: &[f64],
    in_sample: &[bool],
    max_depth: usize,
    min_leaf: usize,
) -> RegressionTree {
    let n = x.nrows();
    let min_leaf = min_leaf.max(1);
    // Position of each row's node in `frontier`, or usize::MAX once it is settled.
    let mut slot: Vec<usize> = (0..n).map(|i| if in_sample[i] { 0 } else { usize::MAX }).collect();
    let (sum, count) = (0..n).filter(|&i| in_sample[i]).fold((0.0, 0), |(s, c), i| (s + target[i], c + 1));
    let mut nodes = vec![RegressionNode::Leaf { value: mean(sum, count) }];
    let mut frontier = vec![Frontier { node: 0, sum, count }];

    for _ in 0..max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let mut left_sum = vec![0.0; frontier.len()];
        let mut left_count = vec![0usize; frontier.len()];
        let mut last_value = vec![f64::NAN; frontier.len()];
        for (f, order) in presorted.order.iter().enumerate() {
            left_sum.iter_mut().for_each(|v| *v = 0.0);
            left_count.iter_mut().for_each(|v| *v = 0);
            for &i in order {
                let s = slot[i];
                if s == usize::MAX {
                    continue;
                }
                let v = x[[i, f]];
                let fr = &frontier[s];
                let nl = left_count[s];
                // A split between the previous row of this node and row i.
                if nl >= min_leaf && fr.count - nl >= min_leaf && v > last_value[s] {
                    let (sl, nr) = (left_sum[s], fr.count - nl);
                    let sr = fr.sum - sl;
                    let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - fr.sum * fr.sum / fr.count as f64;
                    if best[s].map_or(gain > 1e-12, |b| gain > b.gain) {
                        let mid = 0.5 * (last_value[s] + v);
                        let threshold = if mid < v { mid } else { last_value[s] };
                        best[s] = Some(Candidate { gain, feature: f, threshold });
                    }
                }
                left_sum[s] += target[i];
                left_count[s] += 1;
                last_value[s] = v;
            }
            last_value.iter_mut().for_each(|v| *v = f64::NAN);
        }

        let mut next = Vec::new();
        let mut remap = vec![(usize::MAX, usize::MAX); frontier.len()];
        for (s, fr) in frontier.iter().enumerate() {
            let Some(c) = best[s] else { continue };
            let li = nodes.len();
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            nodes.push(RegressionNode::Leaf { value: 0.0 });
            nodes[fr.node] = RegressionNode::Split { feature: c.feature, threshold: c.threshold, left: li, right: li + 1 };
            remap[s] = (next.len(), next.len() + 1);
            next.push(Frontier { node: li, sum: 0.0, count: 0 });
            next.push(Frontier { node: li + 1, sum: 0.0, count: 0 });
        }
        for i in 0..n {
            let s = slot[i];
            if s == usize::MAX {
                continue;
            }
            slot[i] = match best[s] {
                Some(c) => {
                    let child = if x[[i, c.feature]] <= c.threshold { remap[s].0 } else { remap[s].1 };
                    next[child].sum += target[i];
                    next[child].count += 1;
                    child
                }
                None => usize::MAX,
            };
        }
        for fr in &next {
            nodes[fr.node] = RegressionNode::Leaf { value: mean(fr.sum, fr.count) };
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

fn mean(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
