use serde::{Deserialize, Serialize};

use crate::data::{event_time_quantiles, SurvivalDataset};
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::prediction::SurvivalPredictionMatrix;
use crate::step::StepFunction;

/// One IPCW Brier evaluation plus its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrierPoint {
    pub time: f64,
    pub value: f64,
    /// Subjects whose weight was infinite (`G = 0`) and were left out.
    pub zero_weight: usize,
    /// Whether `time` fell beyond the prediction grid and was clamped.
    pub clamped: bool,
}

pub(crate) fn brier_with_censoring(
    pred: &SurvivalPredictionMatrix,
    test: &SurvivalDataset,
    g: &StepFunction,
    t: f64,
) -> Result<BrierPoint> {
    if pred.n_subjects() != test.n() {
        return Err(Error::DimensionMismatch { expected: test.n(), got: pred.n_subjects() });
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evaluation time {t} is not finite")));
    }
    let s = pred.column_at(t);
    let g_t = g.eval(t);
    let mut total = 0.0;
    let mut zero_weight = 0;
    for (i, (&ti, &ei)) in test.times().iter().zip(test.events()).enumerate() {
        if ti <= t && ei {
            let w = g.eval_left(ti);
            if w > 0.0 {
                total += s[i] * s[i] / w;
            } else {
                zero_weight += 1;
            }
        } else if ti > t {
            if g_t > 0.0 {
                total += (1.0 - s[i]) * (1.0 - s[i]) / g_t;
            } else {
                zero_weight += 1;
            }
        }
    }
    Ok(BrierPoint { time: t, value: total / test.n() as f64, zero_weight, clamped: t > pred.grid().last() })
}

/// Inverse-probability-of-censoring weighted Brier score at `t`.
pub fn brier_score_at(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset, t: f64) -> Result<f64> {
    let g = censoring_survival(test).curve;
    Ok(brier_with_censoring(pred, test, &g, t)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierSummary {
    pub points: Vec<BrierPoint>,
    pub mean: f64,
    /// `1 - 2 * mean`; 0 for an uninformative 0.5 prediction, 1 when perfect.
    pub rescaled: f64,
}

pub fn rescale_brier(mean: f64) -> f64 {
    1.0 - 2.0 * mean
}

/// Brier scores at event-time quantiles of `test`, their mean and rescaling.
pub fn brier_summary(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset, qs: &[f64]) -> Result<BrierSummary> {
    if qs.is_empty() {
        return Err(Error::InvalidArgument("no quantile levels given".into()));
    }
    let g = censoring_survival(test).curve;
    let points = event_time_quantiles(test, qs)?
        .into_iter()
        .map(|t| brier_with_censoring(pred, test, &g, t))
        .collect::<Result<Vec<_>>>()?;
    let mean = points.iter().map(|p| p.value).sum::<f64>() / points.len() as f64;
    Ok(BrierSummary { points, mean, rescaled: rescale_brier(mean) })
}
