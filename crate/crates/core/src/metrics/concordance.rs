use serde::{Deserialize, Serialize};

use crate::data::{event_time_quantiles, SurvivalDataset};
use crate::error::{Error, Result};
use crate::prediction::{RiskVector, SurvivalPredictionMatrix};

/// Fenwick tree of counts over rank positions.
struct Counts {
    tree: Vec<u64>,
}

impl Counts {
    fn new(n: usize) -> Self {
        Self { tree: vec![0; n + 1] }
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Dense ranks of `values` (equal values share a rank).
fn dense_ranks(values: &[f64]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = values.iter().map(|v| sorted.partition_point(|s| s < v)).collect();
    (ranks, sorted.len())
}

/// Integer pair tallies; `concordant + ties / 2` over `comparable`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct PairCounts {
    pub concordant: u64,
    pub ties: u64,
    pub comparable: u64,
}

impl PairCounts {
    fn merge(&mut self, o: PairCounts) {
        self.concordant += o.concordant;
        self.ties += o.ties;
        self.comparable += o.comparable;
    }

    pub fn index(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(Error::NoComparablePairs);
        }
        Ok((2 * self.concordant + self.ties) as f64 / (2 * self.comparable) as f64)
    }
}

/// Subjects grouped by equal time, latest first.
fn groups_desc(times: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match out.last_mut() {
            Some(g) if times[g[0]] == times[i] => g.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Sweeps time downwards. For each event `i` accepted by `query`, counts
/// comparable `j` whose `score` is below / equal to `score[i]`, where
/// `i` is concordant with `j` when `score[i] > score[j]`.
fn sweep(groups: &[Vec<usize>], events: &[bool], score: &[f64], query: impl Fn(usize) -> bool) -> PairCounts {
    let (ranks, levels) = dense_ranks(score);
    let mut tree = Counts::new(levels);
    let mut inserted = 0u64;
    let mut out = PairCounts::default();
    for g in groups {
        // Censored subjects at the same time count as later than the events.
        for &j in g.iter().filter(|&&j| !events[j]) {
            tree.add(ranks[j]);
            inserted += 1;
        }
        for &i in g.iter().filter(|&&i| events[i] && query(i)) {
            let below = tree.below(ranks[i]);
            let upto = tree.below(ranks[i] + 1);
            out.concordant += below;
            out.ties += upto - below;
            out.comparable += inserted;
        }
        for &i in g.iter().filter(|&&i| events[i]) {
            tree.add(ranks[i]);
            inserted += 1;
        }
    }
    out
}

pub(crate) fn harrell_counts(scores: &[f64], times: &[f64], events: &[bool]) -> PairCounts {
    sweep(&groups_desc(times), events, scores, |_| true)
}

fn check_len(n: usize, d: &SurvivalDataset) -> Result<()> {
    if n != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: n });
    }
    Ok(())
}

/// Harrell's concordance of scalar risks (higher risk, earlier event).
pub fn harrell_c(risks: &RiskVector, test: &SurvivalDataset) -> Result<f64> {
    check_len(risks.len(), test)?;
    harrell_counts(risks.as_slice(), test.times(), test.events()).index()
}

/// Per-quartile Harrell values at fixed times, ranking on `-S(q | x)`.
/// Same order as `1 - S` without rounding tiny survivals to ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileHarrell {
    pub times: Vec<f64>,
    /// `None` where the quartile had no comparable pairs.
    pub per_quartile: Vec<Option<f64>>,
    /// Mean over the quartiles that produced a value.
    pub mean: f64,
}

pub const QUARTILES: [f64; 3] = [0.25, 0.5, 0.75];

pub fn harrell_c_quartile_avg(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset) -> Result<QuartileHarrell> {
    check_len(pred.n_subjects(), test)?;
    let times = event_time_quantiles(test, &QUARTILES)?;
    let per_quartile: Vec<Option<f64>> = times
        .iter()
        .map(|&q| {
            let risk: Vec<f64> = pred.column_at(q).iter().map(|s| -s).collect();
            harrell_counts(&risk, test.times(), test.events()).index().ok()
        })
        .collect();
    let ok: Vec<f64> = per_quartile.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
    Ok(QuartileHarrell { times, per_quartile, mean })
}

pub(crate) fn antolini_counts(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset) -> PairCounts {
    let (times, events) = (test.times(), test.events());
    let groups = groups_desc(times);
    // Events before the first knot see every curve at 1, so all their pairs tie.
    let column: Vec<Option<usize>> = times.iter().map(|&t| pred.grid().locate(t)).collect();
    let mut used: Vec<usize> = (0..test.n()).filter(|&i| events[i]).filter_map(|i| column[i]).collect();
    used.sort_unstable();
    used.dedup();
    let mut total = PairCounts::default();
    for k in used {
        // Concordant when S(t_i | x_i) < S(t_i | x_j); sweep on -S.
        let score: Vec<f64> = pred.surv().column(k).iter().map(|s| -s).collect();
        total.merge(sweep(&groups, events, &score, |i| column[i] == Some(k)));
    }
    let constant = vec![0.0; test.n()];
    total.merge(sweep(&groups, events, &constant, |i| column[i].is_none()));
    total
}

/// Antolini's time-dependent concordance: survival curves compared at the
/// earlier subject's event time.
pub fn antolini_c(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset) -> Result<f64> {
    check_len(pred.n_subjects(), test)?;
    antolini_counts(pred, test).index()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeGrid;
    use crate::rng::stream;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    fn ds(times: Vec<f64>, events: Vec<bool>) -> SurvivalDataset {
        let n = times.len();
        SurvivalDataset::new(Array2::zeros((n, 1)), times, events).unwrap()
    }

    fn rv(v: Vec<f64>) -> RiskVector {
        RiskVector::new(v).unwrap()
    }

    #[test]
    fn harrell_hand_values() {
        let d = ds(vec![1.0, 2.0, 3.0], vec![true; 3]);
        assert_eq!(harrell_c(&rv(vec![3.0, 2.0, 1.0]), &d).unwrap(), 1.0);
        assert_eq!(harrell_c(&rv(vec![1.0, 2.0, 3.0]), &d).unwrap(), 0.0);
        let d2 = ds(vec![1.0, 2.0], vec![true, true]);
        assert_eq!(harrell_c(&rv(vec![0.3, 0.3]), &d2).unwrap(), 0.5);
        let none = ds(vec![1.0, 2.0], vec![false, false]);
        assert!(matches!(harrell_c(&rv(vec![1.0, 2.0]), &none), Err(Error::NoComparablePairs)));
    }

    #[test]
    fn tied_times_follow_the_event_first_rule() {
        // (1, event) vs (1, censored) is comparable; two tied events are not.
        let d = ds(vec![1.0, 1.0, 1.0], vec![true, false, true]);
        let c = harrell_counts(&[2.0, 1.0, 0.0], d.times(), d.events());
        assert_eq!(c, PairCounts { concordant: 1, ties: 0, comparable: 2 });
    }

    pub(crate) fn random_case(seed: u64, n: usize, k: usize) -> (SurvivalDataset, SurvivalPredictionMatrix, Vec<f64>) {
        let mut rng = stream(seed, &[1]);
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..12) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        let knots: Vec<f64> = (0..k).map(|j| 1.5 + j as f64).collect();
        let surv = Array2::from_shape_fn((n, k), |_| (rng.gen_range(0..6) as f64) / 5.0);
        let mut surv = surv;
        for mut row in surv.rows_mut() {
            let mut v: Vec<f64> = row.to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            row.assign(&ndarray::Array1::from(v));
        }
        let risks = (0..n).map(|_| rng.gen_range(0..8) as f64).collect();
        let pred = SurvivalPredictionMatrix::new(TimeGrid::new(knots).unwrap(), surv).unwrap();
        (ds(times, events), pred, risks)
    }

    #[test]
    fn sweeps_match_pair_enumeration() {
        for seed in 0..200 {
            let (d, pred, risks) = random_case(seed, 50, 8);
            let fast = harrell_counts(&risks, d.times(), d.events()).index().ok();
            assert_eq!(fast, oracle::harrell(&risks, d.times(), d.events()));
            let fast = antolini_counts(&pred, &d).index().ok();
            let slow = oracle::antolini(&pred, d.times(), d.events());
            assert_eq!(fast.is_some(), slow.is_some());
            if let (Some(a), Some(b)) = (fast, slow) {
                assert!((a - b).abs() <= 1e-12, "seed {seed}: {a} vs {b}");
            }
        }
    }

    fn crossing_fixture() -> (SurvivalDataset, SurvivalPredictionMatrix) {
        // Subject 0 dies early and is predicted to drop early; subject 1
        // is predicted to drop late; subject 2 lives longest.
        let d = ds(vec![1.0, 3.0, 5.0], vec![true, true, false]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let surv = array![[0.2, 0.2, 0.2, 0.2], [0.9, 0.9, 0.1, 0.1], [0.8, 0.7, 0.6, 0.5]];
        (d, SurvivalPredictionMatrix::new(grid, surv).unwrap())
    }

    #[test]
    fn crossing_curves_separate_the_metrics() {
        let (d, pred) = crossing_fixture();
        // Antolini: (0,1) at t=1: 0.2 < 0.9; (0,2): 0.2 < 0.8; (1,2) at t=3: 0.1 < 0.6.
        assert_eq!(antolini_c(&pred, &d).unwrap(), 1.0);
        let q = harrell_c_quartile_avg(&pred, &d).unwrap();
        // Event times {1, 3}: quartiles 1.5, 2.0, 2.5 all use column 0 or 1.
        assert_eq!(q.times, vec![1.5, 2.0, 2.5]);
        // At column 0 risks are 0.8, 0.1, 0.2: pairs (0,1) ok, (0,2) ok, (1,2) wrong.
        // At column 1 risks are 0.8, 0.1, 0.3: same ordering.
        for v in &q.per_quartile {
            assert!((v.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        }
        assert!(antolini_c(&pred, &d).unwrap() > q.mean);
    }

    #[test]
    fn per_quartile_values_move_with_crossings() {
        let d = ds(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![true; 5]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        // Quartiles of {1..5} are 2, 3, 4. Row 3 crosses rows 1 and 2 between 2 and 4.
        let surv = array![
            [0.1, 0.1, 0.1, 0.1, 0.1],
            [0.5, 0.4, 0.3, 0.2, 0.1],
            [0.6, 0.5, 0.4, 0.3, 0.2],
            [0.9, 0.6, 0.35, 0.25, 0.15],
            [0.95, 0.9, 0.8, 0.7, 0.6]
        ];
        let pred = SurvivalPredictionMatrix::new(grid, surv).unwrap();
        let q = harrell_c_quartile_avg(&pred, &d).unwrap();
        let v: Vec<f64> = q.per_quartile.iter().map(|v| v.unwrap()).collect();
        // t=2: risks .9 .6 .5 .4 .1, all 10 pairs concordant.
        // t=3: risks .9 .7 .6 .65 .2, pair (2,3) discordant.
        // t=4: risks .9 .8 .7 .75 .3, pair (2,3) discordant.
        assert_eq!(v, vec![1.0, 0.9, 0.9]);
    }

    #[test]
    fn constant_predictions_are_one_half() {
        let d = ds(vec![1.0, 2.0, 3.0, 4.0], vec![true, false, true, true]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let pred = SurvivalPredictionMatrix::new(grid, Array2::from_elem((4, 4), 0.5)).unwrap();
        let q = harrell_c_quartile_avg(&pred, &d).unwrap();
        assert!(q.per_quartile.iter().all(|v| *v == Some(0.5)));
        assert_eq!(antolini_c(&pred, &d).unwrap(), 0.5);
    }

    #[test]
    fn tiny_survivals_stay_ordered() {
        let d = ds(vec![1.0, 2.0, 3.0], vec![true; 3]);
        let grid = TimeGrid::new(vec![0.5, 5.0]).unwrap();
        let pred = SurvivalPredictionMatrix::new(grid, array![[1e-30, 1e-40], [1e-20, 1e-30], [1e-10, 1e-20]]).unwrap();
        let q = harrell_c_quartile_avg(&pred, &d).unwrap();
        assert!(q.per_quartile.iter().all(|v| *v == Some(1.0)), "{:?}", q.per_quartile);
    }

    proptest! {
        #[test]
        fn monotone_transforms_and_permutations_are_invisible(seed in 0u64..500, shift in -3.0f64..3.0) {
            let (d, pred, risks) = random_case(seed, 30, 6);
            let base = harrell_counts(&risks, d.times(), d.events()).index().ok();
            let mapped: Vec<f64> = risks.iter().map(|r| (r + shift).exp()).collect();
            prop_assert_eq!(base, harrell_counts(&mapped, d.times(), d.events()).index().ok());

            let warped = SurvivalPredictionMatrix::new(pred.grid().clone(), pred.surv().mapv(|s| s * s)).unwrap();
            prop_assert_eq!(antolini_counts(&pred, &d), antolini_counts(&warped, &d));

            let perm: Vec<usize> = (0..d.n()).rev().collect();
            let dp = d.subset(&perm);
            let pp = SurvivalPredictionMatrix::new(pred.grid().clone(), pred.surv().select(ndarray::Axis(0), &perm)).unwrap();
            prop_assert_eq!(antolini_counts(&pred, &d), antolini_counts(&pp, &dp));
            let c = antolini_counts(&pred, &d).index();
            if let Ok(c) = c {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }
    }
}
