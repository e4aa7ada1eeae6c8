use serde::{Deserialize, Serialize};

use super::auc::auc_with_censoring;
use super::brier::{brier_with_censoring, rescale_brier};
use super::concordance::{antolini_c, harrell_c_quartile_avg};
use crate::data::{event_time_quantiles, SurvivalDataset};
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::prediction::SurvivalPredictionMatrix;

pub const DEFAULT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// Every metric for one prediction matrix on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub antolini: f64,
    pub harrell_quartile_avg: f64,
    /// `None` where a quartile had no comparable pairs.
    pub harrell_per_quartile: Vec<Option<f64>>,
    pub harrell_times: Vec<f64>,
    pub brier_per_quantile: Vec<f64>,
    pub brier_avg: f64,
    pub brier_rescaled: f64,
    pub auroc_per_quantile: Vec<f64>,
    pub auroc_avg: f64,
    pub eval_times: Vec<f64>,
    /// Evaluation times beyond the prediction grid, clamped to its last knot.
    pub clamped_times: usize,
    /// Subjects dropped from Brier sums because `G` reached 0.
    pub zero_weight_subjects: usize,
}

/// Computes every metric; Brier and AUROC use event-time quantiles `qs`.
pub fn evaluate(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset, qs: &[f64]) -> Result<MetricReport> {
    if pred.n_subjects() != test.n() {
        return Err(Error::DimensionMismatch { expected: test.n(), got: pred.n_subjects() });
    }
    if qs.is_empty() {
        return Err(Error::InvalidArgument("no quantile levels given".into()));
    }
    let antolini = antolini_c(pred, test)?;
    let harrell = harrell_c_quartile_avg(pred, test)?;
    let g = censoring_survival(test).curve;
    let eval_times = event_time_quantiles(test, qs)?;
    let mut brier = Vec::with_capacity(qs.len());
    let mut auroc = Vec::with_capacity(qs.len());
    let mut zero_weight_subjects = 0;
    for &t in &eval_times {
        let b = brier_with_censoring(pred, test, &g, t)?;
        zero_weight_subjects += b.zero_weight;
        brier.push(b.value);
        auroc.push(auc_with_censoring(pred, test, &g, t)?);
    }
    let last = pred.grid().last();
    let clamped_times = eval_times.iter().chain(&harrell.times).filter(|&&t| t > last).count();
    let brier_avg = brier.iter().sum::<f64>() / brier.len() as f64;
    let auroc_avg = auroc.iter().sum::<f64>() / auroc.len() as f64;
    Ok(MetricReport {
        antolini,
        harrell_quartile_avg: harrell.mean,
        harrell_per_quartile: harrell.per_quartile,
        harrell_times: harrell.times,
        brier_per_quantile: brier,
        brier_avg,
        brier_rescaled: rescale_brier(brier_avg),
        auroc_per_quantile: auroc,
        auroc_avg,
        eval_times,
        clamped_times,
        zero_weight_subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TimeGrid;
    use crate::linear::{cox_predict, fit_cox, CoxFitOptions};
    use crate::synthetic::{generate, GeneratorKind, GeneratorSpec};

    #[test]
    fn report_on_linph_cox() {
        let (train, _) = generate(&GeneratorSpec::new(GeneratorKind::LinPh, 600, 1, 0.3)).unwrap();
        let (test, _) = generate(&GeneratorSpec::new(GeneratorKind::LinPh, 300, 2, 0.3)).unwrap();
        let grid = TimeGrid::from_event_quantiles(&train, 100).unwrap();
        let m = fit_cox(&train, &CoxFitOptions::default()).unwrap();
        let (pred, _) = cox_predict(&m, test.features(), &grid).unwrap();
        let r = evaluate(&pred, &test, &DEFAULT_QUANTILES).unwrap();
        for v in [r.antolini, r.harrell_quartile_avg, r.auroc_avg] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(r.brier_per_quantile.iter().all(|b| (0.0..=1.0).contains(b)));
        assert_eq!(r.brier_rescaled, 1.0 - 2.0 * r.brier_avg);
        assert_eq!(r.eval_times.len(), 3);
        // Different coefficient draws per seed, so only a loose sanity floor.
        assert!(r.antolini > 0.5);
    }
}
