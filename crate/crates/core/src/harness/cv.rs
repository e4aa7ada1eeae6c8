use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{compare_params, fit_model, Method, ModelSpec, Params};
use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};
use crate::metrics::{antolini_c, evaluate, MetricReport};
use crate::rng::{derive_seed, stream};

/// Knots in every per-fold prediction grid.
pub const GRID_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedCvPlan {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub inner_repeats: usize,
    pub seed: u64,
}

impl Default for NestedCvPlan {
    fn default() -> Self {
        Self { outer_folds: 3, inner_folds: 5, inner_repeats: 2, seed: 0 }
    }
}

impl NestedCvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.outer_folds < 2 || self.inner_folds < 2 || self.inner_repeats < 1 {
            return Err(Error::Config(format!(
                "plan needs outer_folds >= 2, inner_folds >= 2, inner_repeats >= 1 (got {}, {}, {})",
                self.outer_folds, self.inner_folds, self.inner_repeats
            )));
        }
        Ok(())
    }

    /// Model fits for one (dataset, method) cell with a `g`-point grid.
    pub fn expected_fits(&self, g: usize) -> usize {
        self.outer_folds * (self.inner_folds * self.inner_repeats * g + 1)
    }
}

/// A dataset entering the benchmark, with the columns eligible for
/// standardization marked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchDataset {
    pub name: String,
    pub data: SurvivalDataset,
    pub numeric_mask: Vec<bool>,
}

impl BenchDataset {
    /// Every column numeric.
    pub fn numeric(name: impl Into<String>, data: SurvivalDataset) -> Self {
        let numeric_mask = vec![true; data.p()];
        Self { name: name.into(), data, numeric_mask }
    }
}

/// Column standardization fitted on a training portion only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Preprocessor {
    /// Masked-out columns keep mean 0 and scale 1.
    pub fn fit(x: ArrayView2<'_, f64>, mask: &[bool]) -> Self {
        let n = x.nrows() as f64;
        let mut means = vec![0.0; x.ncols()];
        let mut scales = vec![1.0; x.ncols()];
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if !mask[j] {
                continue;
            }
            let m = col.sum() / n;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            means[j] = m;
            scales[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        Self { means, scales }
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

/// Standardizes both portions with statistics from `train_idx` alone.
pub fn prepare_split(
    d: &SurvivalDataset,
    mask: &[bool],
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    let train = d.subset(train_idx);
    let test = d.subset(test_idx);
    let pre = Preprocessor::fit(train.features(), mask);
    let names = d.feature_names().to_vec();
    Ok((
        train.with_features(pre.apply(train.features()), names.clone())?,
        test.with_features(pre.apply(test.features()), names)?,
    ))
}

/// Partitions `0..n` into `k` folds, optionally balancing event status.
pub fn split_folds(d: &SurvivalDataset, k: usize, seed: u64, stratify_on_event: bool) -> Result<Vec<Vec<usize>>> {
    let n = d.n();
    if k < 2 || k > n {
        return Err(Error::TooFewSubjects { n, k });
    }
    let mut rng = stream(seed, &[0x5f0d]);
    let mut order: Vec<usize> = if stratify_on_event {
        let (mut ev, mut cens): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| d.events()[i]);
        ev.shuffle(&mut rng);
        cens.shuffle(&mut rng);
        ev.extend(cens);
        ev
    } else {
        (0..n).collect()
    };
    if !stratify_on_event {
        order.shuffle(&mut rng);
    }
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Training indices complementary to `folds[f]`.
pub fn complement(folds: &[Vec<usize>], f: usize) -> Vec<usize> {
    let mut out: Vec<usize> = folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.iter().copied()).collect();
    out.sort_unstable();
    out
}

/// Outer folds exactly as [`nested_cv`] draws them.
pub fn outer_folds(d: &SurvivalDataset, plan: &NestedCvPlan) -> Result<Vec<Vec<usize>>> {
    split_folds(d, plan.outer_folds, derive_seed(plan.seed, &[1]), true)
}

fn inner_split_seed(plan: &NestedCvPlan, coord: u64, repeat: usize) -> u64 {
    derive_seed(plan.seed, &[2, coord, repeat as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: Params,
    /// Mean Antolini C-index over the validation sets that succeeded.
    pub mean_antolini: Option<f64>,
    pub n_succeeded: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: Params,
    pub best_index: usize,
    pub scores: Vec<CandidateScore>,
}

/// Fits on `train` and scores Antolini's C on `valid` with a grid of
/// training event-time quantiles.
fn fit_and_score(method: Method, params: &Params, train: &SurvivalDataset, valid: &SurvivalDataset, seed: u64) -> Result<f64> {
    let grid = TimeGrid::from_event_quantiles(train, GRID_SIZE)?;
    let model = fit_model(method, params, train, seed)?;
    let pred = model.predict(valid.features(), &grid)?;
    antolini_c(&pred, valid)
}

/// Grid search by mean Antolini C-index over `inner_folds x inner_repeats`
/// validation sets of `train`. `coord` separates the inner splits of
/// different outer folds.
pub fn inner_select(
    train: &BenchDataset,
    spec: &ModelSpec,
    plan: &NestedCvPlan,
    coord: u64,
    fits: &AtomicUsize,
) -> Result<Selection> {
    spec.validate()?;
    plan.validate()?;
    let candidates = spec.candidates();
    let d = &train.data;
    let mut splits = Vec::new();
    for r in 0..plan.inner_repeats {
        let folds = split_folds(d, plan.inner_folds, inner_split_seed(plan, coord, r), true)?;
        for f in 0..plan.inner_folds {
            splits.push((r, f, complement(&folds, f), folds[f].clone()));
        }
    }
    let tasks: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..splits.len()).map(move |s| (c, s))).collect();
    let results: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(c, s)| {
            let (r, f, tr, va) = &splits[s];
            fits.fetch_add(1, AtomicOrdering::Relaxed);
            let (tr_d, va_d) = prepare_split(d, &train.numeric_mask, tr, va)?;
            let seed = derive_seed(plan.seed, &[3, coord, *r as u64, *f as u64]);
            fit_and_score(spec.method, &candidates[c], &tr_d, &va_d, seed)
        })
        .collect();

    let mut scores = Vec::with_capacity(candidates.len());
    for (c, params) in candidates.iter().enumerate() {
        let vals: Vec<f64> = results[c * splits.len()..(c + 1) * splits.len()].iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let n_failed = splits.len() - vals.len();
        let mean_antolini = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
        scores.push(CandidateScore { params: params.clone(), mean_antolini, n_succeeded: vals.len(), n_failed });
    }
    let best_index = (0..scores.len())
        .filter(|&c| scores[c].mean_antolini.is_some())
        .max_by(|&a, &b| {
            let (sa, sb) = (scores[a].mean_antolini.unwrap(), scores[b].mean_antolini.unwrap());
            // Higher score wins; on ties the smaller tuple, then the earlier index.
            sa.total_cmp(&sb)
                .then_with(|| compare_params(&scores[b].params, &scores[a].params))
                .then_with(|| b.cmp(&a))
        })
        .ok_or(Error::AllCandidatesFailed)?;
    Ok(Selection { best: scores[best_index].params.clone(), best_index, scores })
}

/// Wall-clock costs of one outer fold, kept apart from the metrics so
/// metric tables stay byte-stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldTiming {
    pub select_seconds: f64,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub dataset: String,
    pub method: Method,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub params: Option<Params>,
    pub metrics: Option<MetricReport>,
    /// Whether the refit model produces proportional (non-crossing) curves.
    pub proportional: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub timing: Option<FoldTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCvOutcome {
    pub rows: Vec<FoldResult>,
    pub fits: usize,
    /// Outer test index sets, one per fold.
    pub test_indices: Vec<Vec<usize>>,
}

/// Nested cross-validation of one method on one dataset.
pub fn nested_cv(ds: &BenchDataset, spec: &ModelSpec, plan: &NestedCvPlan, quantiles: &[f64]) -> Result<NestedCvOutcome> {
    spec.validate()?;
    plan.validate()?;
    let folds = outer_folds(&ds.data, plan)?;
    let fits = AtomicUsize::new(0);
    let mut rows = Vec::with_capacity(plan.outer_folds);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx = complement(&folds, f);
        let mut row = FoldResult {
            dataset: ds.name.clone(),
            method: spec.method,
            fold: f,
            n_train: train_idx.len(),
            n_test: test_idx.len(),
            params: None,
            metrics: None,
            proportional: false,
            error: None,
            timing: None,
        };
        match run_outer_fold(ds, spec, plan, f, &train_idx, test_idx, quantiles, &fits, &mut row) {
            Ok(()) => {}
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    Ok(NestedCvOutcome { rows, fits: fits.load(AtomicOrdering::Relaxed), test_indices: folds })
}

#[allow(clippy::too_many_arguments)]
fn run_outer_fold(
    ds: &BenchDataset,
    spec: &ModelSpec,
    plan: &NestedCvPlan,
    f: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    quantiles: &[f64],
    fits: &AtomicUsize,
    row: &mut FoldResult,
) -> Result<()> {
    let t0 = Instant::now();
    let inner = BenchDataset { name: ds.name.clone(), data: ds.data.subset(train_idx), numeric_mask: ds.numeric_mask.clone() };
    let sel = inner_select(&inner, spec, plan, f as u64, fits)?;
    let select_seconds = t0.elapsed().as_secs_f64();
    row.params = Some(sel.best.clone());

    let (train, test) = prepare_split(&ds.data, &ds.numeric_mask, train_idx, test_idx)?;
    let grid = TimeGrid::from_event_quantiles(&train, GRID_SIZE)?;
    let t1 = Instant::now();
    fits.fetch_add(1, AtomicOrdering::Relaxed);
    let model = fit_model(spec.method, &sel.best, &train, derive_seed(plan.seed, &[4, f as u64]))?;
    let fit_seconds = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let pred = model.predict(test.features(), &grid)?;
    let predict_seconds = t2.elapsed().as_secs_f64();
    row.timing = Some(FoldTiming { select_seconds, fit_seconds, predict_seconds });
    row.proportional = model.is_proportional();
    row.metrics = Some(evaluate(&pred, &test, quantiles)?);
    Ok(())
}
