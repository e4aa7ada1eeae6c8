use crate::data::{event_time_quantiles, SurvivalDataset};
use crate::error::{Error, Result};
use crate::nonparam::censoring_survival;
use crate::prediction::SurvivalPredictionMatrix;
use crate::step::StepFunction;

pub(crate) fn auc_with_censoring(
    pred: &SurvivalPredictionMatrix,
    test: &SurvivalDataset,
    g: &StepFunction,
    t: f64,
) -> Result<f64> {
    if pred.n_subjects() != test.n() {
        return Err(Error::DimensionMismatch { expected: test.n(), got: pred.n_subjects() });
    }
    // Ranks on -S: same order as 1 - S, which rounds S < 1e-16 to ties.
    let risk: Vec<f64> = pred.column_at(t).iter().map(|s| -s).collect();
    let mut controls: Vec<f64> = (0..test.n()).filter(|&j| test.times()[j] > t).map(|j| risk[j]).collect();
    controls.sort_by(f64::total_cmp);
    let mut num = 0.0;
    let mut case_weight = 0.0;
    for i in 0..test.n() {
        if !(test.events()[i] && test.times()[i] <= t) {
            continue;
        }
        let g_i = g.eval_left(test.times()[i]);
        if g_i <= 0.0 {
            continue;
        }
        let w = 1.0 / g_i;
        let below = controls.partition_point(|&c| c < risk[i]);
        let upto = controls.partition_point(|&c| c <= risk[i]);
        num += w * (below as f64 + 0.5 * (upto - below) as f64);
        case_weight += w;
    }
    if controls.is_empty() || case_weight == 0.0 {
        return Err(Error::NoCasesOrControls { time: t });
    }
    Ok(num / (case_weight * controls.len() as f64))
}

/// Cumulative/dynamic AUROC at `t`: cases are events by `t` weighted by
/// `1 / G(t_i-)`, controls are subjects still at risk after `t`.
pub fn cumulative_dynamic_auc_at(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset, t: f64) -> Result<f64> {
    let g = censoring_survival(test).curve;
    auc_with_censoring(pred, test, &g, t)
}

/// AUROC at each event-time quantile of `test`, and their mean.
pub fn auc_summary(pred: &SurvivalPredictionMatrix, test: &SurvivalDataset, qs: &[f64]) -> Result<(Vec<f64>, f64)> {
    if qs.is_empty() {
        return Err(Error::InvalidArgument("no quantile levels given".into()));
    }
    let g = censoring_survival(test).curve;
    let values = event_time_quantiles(test, qs)?
        .into_iter()
        .map(|t| auc_with_censoring(pred, test, &g, t))
        .collect::<Result<Vec<_>>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((values, mean))
}
