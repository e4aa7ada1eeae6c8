use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logrank::NodeLogRank;
use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};
use crate::nonparam::nelson_aalen_raw;
use crate::prediction::SurvivalPredictionMatrix;
use crate::rng::stream;
use crate::step::StepFunction;

/// Nodes larger than this sample at most [`MAX_CANDIDATES`] thresholds per feature.
const CANDIDATE_CAP_NODE_SIZE: usize = 256;
const MAX_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurvivalNode {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Nelson-Aalen cumulative hazard of the training subjects in the leaf.
    Leaf { hazard: StepFunction, n: usize, events: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTree {
    pub nodes: Vec<SurvivalNode>,
    pub min_leaf_size: usize,
    pub max_depth: Option<usize>,
}

impl SurvivalTree {
    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                SurvivalNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
                SurvivalNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (usize, &StepFunction, usize, usize)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            SurvivalNode::Leaf { hazard, n, events } => Some((i, hazard, *n, *events)),
            SurvivalNode::Split { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[SurvivalNode], at: usize) -> usize {
            match &nodes[at] {
                SurvivalNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                SurvivalNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsfOptions {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf_size: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RsfOptions {
    fn default() -> Self {
        Self { n_trees: 200, mtry: None, min_leaf_size: 15, max_depth: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfModel {
    pub trees: Vec<SurvivalTree>,
    pub n_trees: usize,
    pub mtry: usize,
    pub seed: u64,
    pub n_features: usize,
}

/// Bootstrap indices drawn for tree `tree` of a forest seeded with `seed`.
pub fn bootstrap_indices(seed: u64, tree: usize, n: usize) -> Vec<usize> {
    let mut rng = stream(seed, &[tree as u64, 0]);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    times: &'a [f64],
    events: &'a [bool],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
}

struct BestSplit {
    stat: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn grow(&self, sample: Vec<usize>, rng: &mut impl Rng) -> SurvivalTree {
        let mut nodes: Vec<SurvivalNode> = vec![self.placeholder()];
        let mut stack = vec![(0usize, sample, 0usize)];
        while let Some((slot, members, depth)) = stack.pop() {
            let split = if self.max_depth.map_or(true, |m| depth < m) && members.len() >= 2 * self.min_leaf {
                self.best_split(&members, rng)
            } else {
                None
            };
            match split {
                Some(best) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        members.iter().partition(|&&i| self.x[[i, best.feature]] <= best.threshold);
                    let li = nodes.len();
                    nodes.push(self.placeholder());
                    nodes.push(self.placeholder());
                    nodes[slot] = SurvivalNode::Split { feature: best.feature, threshold: best.threshold, left: li, right: li + 1 };
                    stack.push((li + 1, r, depth + 1));
                    stack.push((li, l, depth + 1));
                }
                None => nodes[slot] = self.leaf(&members),
            }
        }
        SurvivalTree { nodes, min_leaf_size: self.min_leaf, max_depth: self.max_depth }
    }

    fn placeholder(&self) -> SurvivalNode {
        SurvivalNode::Leaf { hazard: StepFunction::constant(0.0), n: 0, events: 0 }
    }

    fn leaf(&self, members: &[usize]) -> SurvivalNode {
        let t: Vec<f64> = members.iter().map(|&i| self.times[i]).collect();
        let e: Vec<bool> = members.iter().map(|&i| self.events[i]).collect();
        SurvivalNode::Leaf { hazard: nelson_aalen_raw(&t, &e), n: members.len(), events: e.iter().filter(|v| **v).count() }
    }

    fn best_split(&self, members: &[usize], rng: &mut impl Rng) -> Option<BestSplit> {
        let mut event_times: Vec<f64> = members.iter().filter(|&&i| self.events[i]).map(|&i| self.times[i]).collect();
        if event_times.is_empty() {
            return None;
        }
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        let slots: Vec<usize> = members.iter().map(|&i| event_times.partition_point(|&e| e <= self.times[i])).collect();
        let evs: Vec<bool> = members.iter().map(|&i| self.events[i]).collect();
        let total_events = evs.iter().filter(|e| **e).count();
        let mut node = NodeLogRank::new(&slots, &evs, event_times.len());

        let n = members.len();
        let p = self.x.ncols();
        let features = index::sample(rng, p, self.mtry.min(p));
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<usize> = (0..n).collect();
        for f in features.iter() {
            order.sort_by(|&a, &b| self.x[[members[a], f]].total_cmp(&self.x[[members[b], f]]));
            let value = |k: usize| self.x[[members[order[k]], f]];
            // Split after sorted position k puts k + 1 subjects on the left.
            let mut cands: Vec<usize> = (self.min_leaf - 1..n.saturating_sub(self.min_leaf))
                .filter(|&k| value(k) < value(k + 1))
                .collect();
            if cands.is_empty() {
                continue;
            }
            if n > CANDIDATE_CAP_NODE_SIZE && cands.len() > MAX_CANDIDATES {
                let mut picked: Vec<usize> =
                    index::sample(rng, cands.len(), MAX_CANDIDATES).into_iter().map(|j| cands[j]).collect();
                picked.sort_unstable();
                cands = picked;
            }
            node.reset();
            let mut added = 0;
            for &k in &cands {
                while added <= k {
                    node.move_left(slots[order[added]], evs[order[added]]);
                    added += 1;
                }
                if node.left_events == 0 || node.left_events == total_events {
                    continue;
                }
                let stat = node.statistic();
                if best.as_ref().map_or(true, |b| stat > b.stat) {
                    let (lo, hi) = (value(k), value(k + 1));
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { stat, feature: f, threshold });
                }
            }
        }
        best.filter(|b| b.stat > 0.0)
    }
}

/// Random survival forest with log-rank splitting and Nelson-Aalen leaves.
pub fn fit_rsf(d: &SurvivalDataset, opts: &RsfOptions) -> Result<RsfModel> {
    if d.n_events() == 0 {
        return Err(Error::NoEventsObserved);
    }
    if opts.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
    }
    if opts.min_leaf_size == 0 {
        return Err(Error::InvalidArgument("min_leaf_size must be >= 1".into()));
    }
    let p = d.p();
    let mtry = opts.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    if mtry == 0 || mtry > p {
        return Err(Error::InvalidArgument(format!("mtry {mtry} must lie in 1..={p}")));
    }
    let grower = Grower {
        x: d.features(),
        times: d.times(),
        events: d.events(),
        mtry,
        min_leaf: opts.min_leaf_size,
        max_depth: opts.max_depth,
    };
    let trees = (0..opts.n_trees)
        .into_par_iter()
        .map(|t| {
            let sample = bootstrap_indices(opts.seed, t, d.n());
            let mut rng = stream(opts.seed, &[t as u64, 1]);
            grower.grow(sample, &mut rng)
        })
        .collect();
    Ok(RsfModel { trees, n_trees: opts.n_trees, mtry, seed: opts.seed, n_features: p })
}

impl RsfModel {
    /// Builds a model from explicit trees.
    pub fn from_trees(trees: Vec<SurvivalTree>, n_features: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
        }
        Ok(Self { n_trees: trees.len(), trees, mtry: n_features.max(1), seed: 0, n_features })
    }

    /// Forest-averaged cumulative hazard on the grid, one row per subject.
    pub fn cumulative_hazard(&self, x: ArrayView2<'_, f64>, grid: &TimeGrid) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
        let per_tree: Vec<Array2<f64>> = self
            .trees
            .par_iter()
            .map(|tree| {
                let mut on_grid = vec![Vec::new(); tree.nodes.len()];
                for (i, hazard, _, _) in tree.leaves() {
                    on_grid[i] = hazard.eval_on_grid(grid);
                }
                let mut h = Array2::zeros((rows.len(), grid.len()));
                for (mut out, r) in h.axis_iter_mut(Axis(0)).zip(&rows) {
                    let leaf = &on_grid[tree.leaf(r)];
                    out.iter_mut().zip(leaf).for_each(|(o, v)| *o = *v);
                }
                h
            })
            .collect();
        let mut total = Array2::zeros((rows.len(), grid.len()));
        for h in &per_tree {
            total += h;
        }
        total /= self.trees.len() as f64;
        Ok(total)
    }
}

/// `S(t) = exp(-mean_tree H_leaf(t))` on the grid.
pub fn rsf_predict(model: &RsfModel, x: ArrayView2<'_, f64>, grid: &TimeGrid) -> Result<SurvivalPredictionMatrix> {
    let h = model.cumulative_hazard(x, grid)?;
    SurvivalPredictionMatrix::new(grid.clone(), h.mapv(|v| (-v).exp()))
}
