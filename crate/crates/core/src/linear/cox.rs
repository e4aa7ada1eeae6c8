use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::nonparam::breslow_raw;
use crate::prediction::{RiskVector, SurvivalPredictionMatrix};
use crate::step::StepFunction;

/// Value and derivatives of the Breslow partial log-likelihood.
#[derive(Debug, Clone)]
pub struct PartialLikelihood {
    pub loglik: f64,
    pub gradient: Vec<f64>,
    /// Observed information (negative Hessian), row-major `p x p`; empty
    /// when not requested.
    pub information: Vec<f64>,
}

/// Zero-mean, unit-variance column transform learned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let means: Vec<f64> = x.axis_iter(Axis(1)).map(|c| c.sum() / n).collect();
        let scales = x
            .axis_iter(Axis(1))
            .zip(&means)
            .map(|(c, m)| {
                let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
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

/// Partial log-likelihood with Breslow ties, optionally with the information
/// matrix. `x` is `n x p`; the linear predictor is `x . beta`.
pub(crate) fn breslow_loglik_derivatives(
    x: ArrayView2<'_, f64>,
    times: &[f64],
    events: &[bool],
    beta: &[f64],
    with_information: bool,
) -> Result<PartialLikelihood> {
    let (n, p) = x.dim();
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    let eta: Vec<f64> = x.axis_iter(Axis(0)).map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::OverflowGuard);
    }
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut loglik = 0.0;
    let mut gradient = vec![0.0; p];
    let mut information = if with_information { vec![0.0; p * p] } else { Vec::new() };
    let mut w_sum = 0.0;
    let mut wx = vec![0.0; p];
    let mut wxx = if with_information { vec![0.0; p * p] } else { Vec::new() };

    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let start = i;
        while i < n && times[order[i]] == t {
            let k = order[i];
            let row = x.row(k);
            w_sum += w[k];
            for a in 0..p {
                wx[a] += w[k] * row[a];
                if with_information {
                    for b in 0..=a {
                        wxx[a * p + b] += w[k] * row[a] * row[b];
                    }
                }
            }
            i += 1;
        }
        let d = order[start..i].iter().filter(|&&k| events[k]).count();
        if d == 0 {
            continue;
        }
        let log_w = w_sum.ln() + shift;
        for &k in order[start..i].iter().filter(|&&k| events[k]) {
            loglik += eta[k] - log_w;
            let row = x.row(k);
            for a in 0..p {
                gradient[a] += row[a] - wx[a] / w_sum;
            }
        }
        if with_information {
            let df = d as f64;
            for a in 0..p {
                let ma = wx[a] / w_sum;
                for b in 0..=a {
                    let v = df * (wxx[a * p + b] / w_sum - ma * wx[b] / w_sum);
                    information[a * p + b] += v;
                }
            }
        }
    }
    if with_information {
        for a in 0..p {
            for b in 0..a {
                information[b * p + a] = information[a * p + b];
            }
        }
    }
    if !loglik.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::OverflowGuard);
    }
    Ok(PartialLikelihood { loglik, gradient, information })
}

/// Breslow-ties partial log-likelihood of `beta` and its gradient.
pub fn cox_partial_loglik(d: &SurvivalDataset, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if beta.len() != d.p() {
        return Err(Error::DimensionMismatch { expected: d.p(), got: beta.len() });
    }
    let pl = breslow_loglik_derivatives(d.features(), d.times(), d.events(), beta, false)?;
    Ok((pl.loglik, pl.gradient))
}

/// One undamped Newton direction for `l(beta) - ridge |beta|^2 / 2` on the
/// raw (unstandardized) features.
pub fn cox_newton_direction(d: &SurvivalDataset, beta: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let p = d.p();
    let pl = breslow_loglik_derivatives(d.features(), d.times(), d.events(), beta, true)?;
    newton_solve(&pl, beta, ridge, p)
}

fn newton_solve(pl: &PartialLikelihood, beta: &[f64], ridge: f64, p: usize) -> Result<Vec<f64>> {
    let mut a = pl.information.clone();
    for j in 0..p {
        a[j * p + j] += ridge;
    }
    let g: Vec<f64> = pl.gradient.iter().zip(beta).map(|(g, b)| g - ridge * b).collect();
    cholesky_solve(&a, &g).ok_or(Error::SingularHessian)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxFitOptions {
    /// Ridge added on the standardized scale.
    pub ridge_eps: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest gradient component.
    pub tol: f64,
}

impl Default for CoxFitOptions {
    fn default() -> Self {
        Self { ridge_eps: 0.0, max_iter: 100, tol: 1e-7 }
    }
}

/// Fitted linear proportional-hazards model.
///
/// Risks are centered at the training feature means:
/// `risk(x) = sum_j (x_j - mean_j) * beta_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub beta: Vec<f64>,
    pub baseline: StepFunction,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl CoxModel {
    pub(crate) fn from_standardized(
        train: &SurvivalDataset,
        std: Standardization,
        beta_std: &[f64],
        converged: bool,
        n_iter: usize,
    ) -> Result<Self> {
        let beta: Vec<f64> = beta_std.iter().zip(&std.scales).map(|(b, s)| b / s).collect();
        let mut model = Self {
            beta,
            baseline: StepFunction::constant(0.0),
            feature_means: std.means,
            feature_scales: std.scales,
            converged,
            n_iter,
        };
        let risks = model.risks(train.features())?;
        model.baseline = breslow_raw(train.times(), train.events(), &risks)?;
        Ok(model)
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub(crate) fn risks(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: x.ncols() });
        }
        Ok(x.axis_iter(Axis(0))
            .map(|r| {
                r.iter()
                    .zip(&self.feature_means)
                    .zip(&self.beta)
                    .map(|((v, m), b)| (v - m) * b)
                    .sum()
            })
            .collect())
    }
}

/// Newton-Raphson maximizer of the partial likelihood with an optional
/// ridge term, on internally standardized features.
pub fn fit_cox(d: &SurvivalDataset, opts: &CoxFitOptions) -> Result<CoxModel> {
    fit_cox_traced(d, opts, &mut Vec::new())
}

/// As [`fit_cox`], recording the penalized objective after every accepted step.
fn fit_cox_traced(d: &SurvivalDataset, opts: &CoxFitOptions, trace: &mut Vec<f64>) -> Result<CoxModel> {
    if d.n_events() == 0 {
        return Err(Error::NoEventsObserved);
    }
    if opts.ridge_eps < 0.0 {
        return Err(Error::InvalidArgument("ridge_eps must be non-negative".into()));
    }
    let std = Standardization::fit(d.features());
    let x = std.apply(d.features());
    let p = d.p();
    let ridge = opts.ridge_eps;
    let objective = |pl: &PartialLikelihood, b: &[f64]| pl.loglik - 0.5 * ridge * b.iter().map(|v| v * v).sum::<f64>();

    let mut beta = vec![0.0; p];
    let mut pl = breslow_loglik_derivatives(x.view(), d.times(), d.events(), &beta, true)?;
    let mut converged = false;
    let mut n_iter = 0;
    trace.push(objective(&pl, &beta));
    while n_iter < opts.max_iter {
        // Factorize first so a flat likelihood still reports singular information.
        let step = newton_solve(&pl, &beta, ridge, p)?;
        let grad_max = pl
            .gradient
            .iter()
            .zip(&beta)
            .map(|(g, b)| (g - ridge * b).abs())
            .fold(0.0, f64::max);
        if grad_max < opts.tol {
            converged = true;
            break;
        }
        let current = objective(&pl, &beta);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            if let Ok(next) = breslow_loglik_derivatives(x.view(), d.times(), d.events(), &cand, true) {
                if objective(&next, &cand) >= current {
                    accepted = Some((cand, next));
                    break;
                }
            }
            scale *= 0.5;
        }
        n_iter += 1;
        match accepted {
            Some((b, next)) => {
                beta = b;
                pl = next;
                trace.push(objective(&pl, &beta));
            }
            None => break,
        }
    }
    if !converged {
        let grad_max = pl
            .gradient
            .iter()
            .zip(&beta)
            .map(|(g, b)| (g - ridge * b).abs())
            .fold(0.0, f64::max);
        converged = grad_max < opts.tol;
    }
    CoxModel::from_standardized(d, std, &beta, converged, n_iter)
}

/// Survival curves and centered risks for new subjects.
pub fn cox_predict(
    model: &CoxModel,
    x: ArrayView2<'_, f64>,
    grid: &TimeGrid,
) -> Result<(SurvivalPredictionMatrix, RiskVector)> {
    let risks = model.risks(x)?;
    let surv = proportional_survival(&model.baseline, &risks, grid);
    Ok((SurvivalPredictionMatrix::new(grid.clone(), surv)?, RiskVector::new(risks)?))
}

/// `exp(-H0(t) * exp(r))` on the grid for every risk.
pub(crate) fn proportional_survival(baseline: &StepFunction, risks: &[f64], grid: &TimeGrid) -> Array2<f64> {
    let h0 = Array1::from(baseline.eval_on_grid(grid));
    let mut surv = Array2::zeros((risks.len(), grid.len()));
    for (mut row, r) in surv.axis_iter_mut(Axis(0)).zip(risks) {
        let scale = r.exp();
        row.zip_mut_with(&h0, |s, h| *s = (-h * scale).exp());
    }
    surv
}
