use std::sync::atomic::AtomicUsize;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cv::{inner_select, nested_cv, prepare_split, BenchDataset, FoldResult, NestedCvPlan, GRID_SIZE};
use super::model::{fit_model, Method, ModelSpec, Params};
use crate::data::TimeGrid;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, score_correlation, MetricReport};
use crate::rng::derive_seed;
use crate::synthetic::{generate, subsample_pool_indices, GeneratorSpec};

/// Scalar metric fields carried into long-format and aggregate tables.
pub const METRIC_FIELDS: [&str; 7] =
    ["antolini", "harrell_quartile_avg", "harrell_q25", "harrell_q50", "harrell_q75", "brier_rescaled", "auroc_avg"];

/// Looks up one of [`METRIC_FIELDS`]. Per-quartile Harrell values are
/// `None` when the quartile had no comparable pairs.
pub fn metric_value(m: &MetricReport, field: &str) -> Option<f64> {
    match field {
        "antolini" => Some(m.antolini),
        "harrell_quartile_avg" => Some(m.harrell_quartile_avg),
        "harrell_q25" => m.harrell_per_quartile.first().copied().flatten(),
        "harrell_q50" => m.harrell_per_quartile.get(1).copied().flatten(),
        "harrell_q75" => m.harrell_per_quartile.get(2).copied().flatten(),
        "brier_rescaled" => Some(m.brier_rescaled),
        "auroc_avg" => Some(m.auroc_avg),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub method: Method,
    pub metric: String,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n_folds: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCorrelations {
    pub n_cells: usize,
    /// Pearson correlation of per-cell mean Antolini against mean rescaled Brier.
    pub antolini_vs_brier_rescaled: Option<f64>,
    /// Pearson correlation of per-cell mean Antolini against mean AUROC.
    pub antolini_vs_auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub plan: NestedCvPlan,
    pub quantiles: Vec<f64>,
    pub rows: Vec<FoldResult>,
    pub aggregates: Vec<AggregateRow>,
    pub correlations: CellCorrelations,
    pub fits: usize,
}

impl BenchmarkReport {
    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn aggregate(&self, dataset: &str, method: Method, metric: &str) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.dataset == dataset && a.method == method && a.metric == metric)
    }

    pub fn mean(&self, dataset: &str, method: Method, metric: &str) -> Option<f64> {
        self.aggregate(dataset, method, metric).and_then(|a| a.mean)
    }

    /// Rebuilds aggregates and correlations from `rows`.
    pub fn from_rows(plan: NestedCvPlan, quantiles: Vec<f64>, rows: Vec<FoldResult>, fits: usize) -> Self {
        let mut cells: Vec<(String, Method)> = Vec::new();
        for r in &rows {
            if !cells.iter().any(|(d, m)| *d == r.dataset && *m == r.method) {
                cells.push((r.dataset.clone(), r.method));
            }
        }
        let mut aggregates = Vec::new();
        for (d, m) in &cells {
            let cell: Vec<&FoldResult> = rows.iter().filter(|r| r.dataset == *d && r.method == *m).collect();
            let n_failed = cell.iter().filter(|r| r.metrics.is_none()).count();
            for field in METRIC_FIELDS {
                let vals: Vec<f64> = cell.iter().filter_map(|r| r.metrics.as_ref().and_then(|x| metric_value(x, field))).collect();
                let (mean, min, max) = if vals.is_empty() {
                    (None, None, None)
                } else {
                    (
                        Some(vals.iter().sum::<f64>() / vals.len() as f64),
                        vals.iter().copied().reduce(f64::min),
                        vals.iter().copied().reduce(f64::max),
                    )
                };
                aggregates.push(AggregateRow {
                    dataset: d.clone(),
                    method: *m,
                    metric: field.to_string(),
                    mean,
                    min,
                    max,
                    n_folds: cell.len(),
                    n_failed,
                });
            }
        }
        let mut report = Self {
            plan,
            quantiles,
            rows,
            aggregates,
            correlations: CellCorrelations { n_cells: 0, antolini_vs_brier_rescaled: None, antolini_vs_auroc: None },
            fits,
        };
        let (mut a, mut b, mut u) = (Vec::new(), Vec::new(), Vec::new());
        for (d, m) in &cells {
            if let (Some(x), Some(y), Some(z)) =
                (report.mean(d, *m, "antolini"), report.mean(d, *m, "brier_rescaled"), report.mean(d, *m, "auroc_avg"))
            {
                a.push(x);
                b.push(y);
                u.push(z);
            }
        }
        report.correlations = CellCorrelations {
            n_cells: a.len(),
            antolini_vs_brier_rescaled: score_correlation(&a, &b).ok(),
            antolini_vs_auroc: score_correlation(&a, &u).ok(),
        };
        report
    }
}

/// Nested cross-validation over every (dataset, method) pair. Cells that
/// fail are recorded in their rows; only invalid inputs abort the sweep.
pub fn run_benchmark(
    datasets: &[BenchDataset],
    specs: &[ModelSpec],
    plan: &NestedCvPlan,
    quantiles: &[f64],
) -> Result<BenchmarkReport> {
    if datasets.is_empty() {
        return Err(Error::EmptySweep("no datasets"));
    }
    if specs.is_empty() {
        return Err(Error::EmptySweep("no model specs"));
    }
    plan.validate()?;
    for s in specs {
        s.validate()?;
    }
    let mut rows = Vec::new();
    let mut fits = 0;
    for (di, ds) in datasets.iter().enumerate() {
        for spec in specs {
            let cell_plan = NestedCvPlan { seed: derive_seed(plan.seed, &[di as u64]), ..*plan };
            match nested_cv(ds, spec, &cell_plan, quantiles) {
                Ok(out) => {
                    fits += out.fits;
                    rows.extend(out.rows);
                }
                Err(e) => rows.extend((0..plan.outer_folds).map(|f| FoldResult {
                    dataset: ds.name.clone(),
                    method: spec.method,
                    fold: f,
                    n_train: 0,
                    n_test: 0,
                    params: None,
                    metrics: None,
                    proportional: false,
                    error: Some(e.to_string()),
                    timing: None,
                })),
            }
        }
    }
    Ok(BenchmarkReport::from_rows(*plan, quantiles.to_vec(), rows, fits))
}

/// Sample-size ablation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub pool: GeneratorSpec,
    pub sizes: Vec<usize>,
    pub holdout_n: usize,
    /// Censored share of every training subsample and of the holdout.
    pub censored_fraction: f64,
    pub cv: NestedCvPlan,
}

impl AblationPlan {
    pub fn new(pool: GeneratorSpec, cv: NestedCvPlan) -> Self {
        let censored_fraction = pool.censoring_fraction;
        Self { pool, sizes: vec![300, 600, 1200, 2400], holdout_n: 2000, censored_fraction, cv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: Method,
    pub size: usize,
    pub params: Option<Params>,
    pub metrics: Option<MetricReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub fit_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub plan: AblationPlan,
    pub quantiles: Vec<f64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn get(&self, method: Method, size: usize) -> Option<&MetricReport> {
        self.rows.iter().find(|r| r.method == method && r.size == size).and_then(|r| r.metrics.as_ref())
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Indices of the fixed holdout and of the remaining training pool.
pub fn ablation_split(pool: &crate::data::SurvivalDataset, plan: &AblationPlan) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut holdout = subsample_pool_indices(pool, plan.holdout_n, derive_seed(plan.cv.seed, &[10]), plan.censored_fraction)?;
    holdout.sort_unstable();
    let mut taken = vec![false; pool.n()];
    for &i in &holdout {
        taken[i] = true;
    }
    let rest = (0..pool.n()).filter(|&i| !taken[i]).collect();
    Ok((holdout, rest))
}

/// Trains every spec on nested subsamples of one pool and scores them on a
/// holdout drawn once before any subsampling.
pub fn run_ablation(plan: &AblationPlan, specs: &[ModelSpec], quantiles: &[f64]) -> Result<AblationTable> {
    if specs.is_empty() {
        return Err(Error::EmptySweep("no model specs"));
    }
    if plan.sizes.is_empty() {
        return Err(Error::EmptySweep("no ablation sizes"));
    }
    plan.cv.validate()?;
    for s in specs {
        s.validate()?;
    }
    let (pool, _) = generate(&plan.pool)?;
    let (holdout_idx, rest_idx) = ablation_split(&pool, plan)?;
    let rest = pool.subset(&rest_idx);
    let mut rows = Vec::new();
    for &size in &plan.sizes {
        let picked = subsample_pool_indices(&rest, size, derive_seed(plan.cv.seed, &[11, size as u64]), plan.censored_fraction)?;
        let train_idx: Vec<usize> = picked.iter().map(|&k| rest_idx[k]).collect();
        for spec in specs {
            let mut row = AblationRow { method: spec.method, size, params: None, metrics: None, error: None, fit_seconds: None };
            if let Err(e) = ablation_cell(&pool, &train_idx, &holdout_idx, spec, plan, size, quantiles, &mut row) {
                row.error = Some(e.to_string());
            }
            rows.push(row);
        }
    }
    Ok(AblationTable { plan: plan.clone(), quantiles: quantiles.to_vec(), rows })
}

#[allow(clippy::too_many_arguments)]
fn ablation_cell(
    pool: &crate::data::SurvivalDataset,
    train_idx: &[usize],
    holdout_idx: &[usize],
    spec: &ModelSpec,
    plan: &AblationPlan,
    size: usize,
    quantiles: &[f64],
    row: &mut AblationRow,
) -> Result<()> {
    let t0 = Instant::now();
    let inner = BenchDataset::numeric("ablation", pool.subset(train_idx));
    let sel = inner_select(&inner, spec, &plan.cv, size as u64, &AtomicUsize::new(0))?;
    row.params = Some(sel.best.clone());
    let mask = vec![true; pool.p()];
    let (train, test) = prepare_split(pool, &mask, train_idx, holdout_idx)?;
    let grid = TimeGrid::from_event_quantiles(&train, GRID_SIZE)?;
    let model = fit_model(spec.method, &sel.best, &train, derive_seed(plan.cv.seed, &[12, size as u64]))?;
    row.fit_seconds = Some(t0.elapsed().as_secs_f64());
    let pred = model.predict(test.features(), &grid)?;
    row.metrics = Some(evaluate(&pred, &test, quantiles)?);
    Ok(())
}
