use ndarray::{ArrayView2, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::regression_tree::{fit_regression_tree, Presorted, RegressionTree};
use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};
use crate::linear::proportional_survival;
use crate::nonparam::breslow_raw;
use crate::prediction::{RiskVector, SurvivalPredictionMatrix};
use crate::rng::stream;
use crate::step::StepFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbCoxOptions {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf_size: usize,
    /// Fraction of subjects each stage's tree is fitted on.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbCoxOptions {
    fn default() -> Self {
        Self { n_stages: 200, learning_rate: 0.1, max_depth: 3, min_leaf_size: 1, subsample: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedCoxModel {
    /// Trees with the learning rate already folded into the leaves.
    pub stages: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub subsample: f64,
    pub baseline: StepFunction,
    pub n_features: usize,
    /// Training partial log-likelihood before any stage and after each one.
    pub train_loglik: Vec<f64>,
}

/// Breslow partial log-likelihood of per-subject scores and its gradient.
///
/// The gradient is the martingale residual `delta_i - exp(F_i) H(t_i)` with
/// `H` the Breslow cumulative hazard at the current scores.
pub fn cox_score_gradient(times: &[f64], events: &[bool], scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = times.len();
    if scores.len() != n || events.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: scores.len().min(events.len()) });
    }
    let shift = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::OverflowGuard);
    }
    let w: Vec<f64> = scores.iter().map(|s| (s - shift).exp()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    // Risk-set weight and event count per distinct time, latest first.
    let mut groups: Vec<(usize, usize, f64, usize)> = Vec::new();
    let mut w_sum = 0.0;
    let mut loglik = 0.0;
    let mut i = 0;
    while i < n {
        let start = i;
        let t = times[order[i]];
        while i < n && times[order[i]] == t {
            w_sum += w[order[i]];
            i += 1;
        }
        let d = order[start..i].iter().filter(|&&k| events[k]).count();
        if d > 0 {
            let log_w = w_sum.ln() + shift;
            loglik += order[start..i].iter().filter(|&&k| events[k]).map(|&k| scores[k] - log_w).sum::<f64>();
        }
        groups.push((start, i, w_sum, d));
    }
    let mut grad = vec![0.0; n];
    let mut hazard = 0.0;
    for &(start, end, w_sum, d) in groups.iter().rev() {
        hazard += d as f64 / w_sum;
        for &k in &order[start..end] {
            grad[k] = f64::from(u8::from(events[k])) - w[k] * hazard;
        }
    }
    if !loglik.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::OverflowGuard);
    }
    Ok((loglik, grad))
}

/// Gradient boosting of least-squares trees on the Cox partial likelihood.
pub fn fit_gbcox(d: &SurvivalDataset, opts: &GbCoxOptions) -> Result<GradientBoostedCoxModel> {
    if d.n_events() == 0 {
        return Err(Error::NoEventsObserved);
    }
    if opts.n_stages == 0 {
        return Err(Error::InvalidArgument("n_stages must be >= 1".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("learning_rate {} must lie in (0, 1]", opts.learning_rate)));
    }
    if !(opts.subsample > 0.0 && opts.subsample <= 1.0) {
        return Err(Error::InvalidArgument(format!("subsample {} must lie in (0, 1]", opts.subsample)));
    }
    let x = d.features();
    let n = d.n();
    let presorted = Presorted::new(x);
    let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let n_sub = ((opts.subsample * n as f64).round() as usize).clamp(1, n);

    let mut scores = vec![0.0; n];
    let (mut loglik, mut grad) = cox_score_gradient(d.times(), d.events(), &scores)?;
    let mut trace = vec![loglik];
    let mut stages = Vec::with_capacity(opts.n_stages);
    let mut in_sample = vec![true; n];
    for stage in 0..opts.n_stages {
        if n_sub < n {
            in_sample.iter_mut().for_each(|v| *v = false);
            let mut rng = stream(opts.seed, &[stage as u64]);
            for i in index::sample(&mut rng, n, n_sub) {
                in_sample[i] = true;
            }
        }
        let mut tree = fit_regression_tree(x, &presorted, &grad, &in_sample, opts.max_depth, opts.min_leaf_size);
        tree.map_leaves(|v| v * opts.learning_rate);
        for (s, r) in scores.iter_mut().zip(&rows) {
            *s += tree.predict_row(r);
        }
        stages.push(tree);
        (loglik, grad) = cox_score_gradient(d.times(), d.events(), &scores)?;
        trace.push(loglik);
    }
    let baseline = breslow_raw(d.times(), d.events(), &scores)?;
    Ok(GradientBoostedCoxModel {
        stages,
        learning_rate: opts.learning_rate,
        subsample: opts.subsample,
        baseline,
        n_features: d.p(),
        train_loglik: trace,
    })
}

impl GradientBoostedCoxModel {
    /// Summed stage contributions, the log-relative hazard of each row.
    pub fn risks(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.ncols() });
        }
        Ok(x.axis_iter(Axis(0))
            .map(|r| {
                let r = r.to_vec();
                self.stages.iter().map(|t| t.predict_row(&r)).sum()
            })
            .collect())
    }
}

/// Proportional survival curves from the stored Breslow baseline.
pub fn gbcox_predict(
    model: &GradientBoostedCoxModel,
    x: ArrayView2<'_, f64>,
    grid: &TimeGrid,
) -> Result<(SurvivalPredictionMatrix, RiskVector)> {
    let risks = model.risks(x)?;
    let surv = proportional_survival(&model.baseline, &risks, grid);
    Ok((SurvivalPredictionMatrix::new(grid.clone(), surv)?, RiskVector::new(risks)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{cox_partial_loglik, fit_cox, CoxFitOptions};
    use crate::metrics::{antolini_c, harrell_c};
    use crate::nonparam::nelson_aalen;
    use crate::synthetic::{generate, GeneratorKind, GeneratorSpec};
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            let mut rng = stream(seed, &[77]);
            let n = rng.gen_range(3..15);
            let times: Vec<f64> = (0..n).map(|_| rng.gen_range(1..6) as f64).collect();
            let events: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            // With identity features the coefficients are the scores.
            let d = SurvivalDataset::new(Array2::eye(n), times.clone(), events.clone()).unwrap();
            let (ll, grad) = cox_score_gradient(&times, &events, &scores).unwrap();
            let (ll_ref, _) = cox_partial_loglik(&d, &scores).unwrap();
            assert!((ll - ll_ref).abs() < 1e-10);
            for i in 0..n {
                let h = 1e-5;
                let mut up = scores.clone();
                let mut dn = scores.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (cox_partial_loglik(&d, &up).unwrap().0 - cox_partial_loglik(&d, &dn).unwrap().0) / (2.0 * h);
                let rel = (grad[i] - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-5, "seed {seed} i {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    fn nonlin(n: usize, seed: u64) -> SurvivalDataset {
        generate(&GeneratorSpec::new(GeneratorKind::NonLinPh, n, seed, 0.3)).unwrap().0
    }

    #[test]
    fn zero_stages_give_the_nelson_aalen_curve() {
        let d = nonlin(200, 1);
        let mut m = fit_gbcox(&d, &GbCoxOptions { n_stages: 1, ..Default::default() }).unwrap();
        m.stages[0].map_leaves(|_| 0.0);
        m.baseline = breslow_raw(d.times(), d.events(), &vec![0.0; d.n()]).unwrap();
        let grid = TimeGrid::from_event_quantiles(&d, 50).unwrap();
        let (pred, risks) = gbcox_predict(&m, d.features(), &grid).unwrap();
        assert!(risks.as_slice().iter().all(|&r| r == 0.0));
        let want: Vec<f64> = nelson_aalen(&d).eval_on_grid(&grid).iter().map(|h| (-h).exp()).collect();
        for i in 0..d.n() {
            for (a, b) in pred.row(i).iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn training_likelihood_never_drops() {
        let d = nonlin(600, 2);
        for lr in [0.05, 0.1] {
            let m = fit_gbcox(&d, &GbCoxOptions { n_stages: 60, learning_rate: lr, seed: 4, ..Default::default() }).unwrap();
            assert_eq!(m.train_loglik.len(), 61);
            assert!(m.train_loglik.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{:?}", m.train_loglik);
        }
    }

    #[test]
    fn predictions_are_proportional_and_rank_invariant() {
        let d = nonlin(300, 3);
        let m = fit_gbcox(&d, &GbCoxOptions { n_stages: 30, subsample: 0.7, seed: 1, ..Default::default() }).unwrap();
        let grid = TimeGrid::from_event_quantiles(&d, 100).unwrap();
        let (pred, risks) = gbcox_predict(&m, d.features(), &grid).unwrap();
        assert!(pred.rows_never_cross());
        let r = risks.as_slice();
        let (hi, lo) = (0..d.n()).fold((0, 0), |(h, l), i| (if r[i] > r[h] { i } else { h }, if r[i] < r[l] { i } else { l }));
        assert!(pred.row(hi).iter().zip(pred.row(lo).iter()).all(|(a, b)| a <= b));

        let mut shifted = m.clone();
        for t in &mut shifted.stages {
            t.map_leaves(|v| v + 0.25);
        }
        let r2 = shifted.risks(d.features()).unwrap();
        let c1 = harrell_c(&risks, &d).unwrap();
        let c2 = harrell_c(&RiskVector::new(r2).unwrap(), &d).unwrap();
        assert_eq!(c1, c2);
        let wrong = Array2::<f64>::zeros((2, 3));
        assert!(matches!(gbcox_predict(&m, wrong.view(), &grid), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn same_seed_same_model() {
        let d = nonlin(200, 5);
        let o = GbCoxOptions { n_stages: 10, subsample: 0.5, seed: 8, ..Default::default() };
        assert_eq!(fit_gbcox(&d, &o).unwrap(), fit_gbcox(&d, &o).unwrap());
    }

    #[test]
    fn beats_linear_cox_on_nonlinear_data() {
        let train = nonlin(2400, 11);
        let test = nonlin(1500, 12);
        let grid = TimeGrid::from_event_quantiles(&train, 100).unwrap();
        let cox = fit_cox(&train, &CoxFitOptions::default()).unwrap();
        let (cp, _) = crate::linear::cox_predict(&cox, test.features(), &grid).unwrap();
        let gb = fit_gbcox(&train, &GbCoxOptions { n_stages: 300, max_depth: 3, min_leaf_size: 10, subsample: 0.8, seed: 1, ..Default::default() }).unwrap();
        let (gp, _) = gbcox_predict(&gb, test.features(), &grid).unwrap();
        let c_cox = antolini_c(&cp, &test).unwrap();
        let c_gb = antolini_c(&gp, &test).unwrap();
        assert!(c_gb - c_cox >= 0.05, "gbcox {c_gb} vs cox {c_cox}");
    }
}
