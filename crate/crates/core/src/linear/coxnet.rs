use serde::{Deserialize, Serialize};

use super::cox::{breslow_loglik_derivatives, CoxModel, Standardization};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// Elastic-net penalty `lambda * (l1_ratio |b|_1 + (1 - l1_ratio) |b|^2 / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetConfig {
    pub lambda: f64,
    pub l1_ratio: f64,
}

impl ElasticNetConfig {
    pub fn new(lambda: f64, l1_ratio: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&l1_ratio) {
            return Err(Error::InvalidArgument(format!("l1_ratio {l1_ratio} must be in [0, 1]")));
        }
        Ok(Self { lambda, l1_ratio })
    }

    fn penalty(&self, beta: &[f64]) -> f64 {
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        self.lambda * (self.l1_ratio * l1 + 0.5 * (1.0 - self.l1_ratio) * l2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxNetOptions {
    /// Budget of coordinate sweeps across all outer iterations.
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CoxNetOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, tol: 1e-7 }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest lambda at which every standardized coefficient is zero.
///
/// Ridge-only paths (`l1_ratio == 0`) use `l1_ratio = 1e-3` here.
pub fn coxnet_lambda_max(d: &SurvivalDataset, l1_ratio: f64) -> Result<f64> {
    let std = Standardization::fit(d.features());
    let x = std.apply(d.features());
    let pl = breslow_loglik_derivatives(x.view(), d.times(), d.events(), &vec![0.0; d.p()], false)?;
    let n = d.n() as f64;
    let alpha = l1_ratio.max(1e-3);
    Ok(pl.gradient.iter().map(|g| g.abs()).fold(0.0, f64::max) / (n * alpha))
}

/// 50 log-spaced values from `lambda_max` down to `1e-3 * lambda_max`.
pub fn default_lambda_path(lambda_max: f64) -> Vec<f64> {
    let k = 50;
    (0..k)
        .map(|i| lambda_max * 10f64.powf(-3.0 * i as f64 / (k - 1) as f64))
        .collect()
}

struct Solver<'a> {
    d: &'a SurvivalDataset,
    x: ndarray::Array2<f64>,
    opts: CoxNetOptions,
    sweeps: usize,
}

impl Solver<'_> {
    fn objective(&self, beta: &[f64], cfg: &ElasticNetConfig) -> Result<f64> {
        let pl = breslow_loglik_derivatives(self.x.view(), self.d.times(), self.d.events(), beta, false)?;
        Ok(pl.loglik / self.d.n() as f64 - cfg.penalty(beta))
    }

    /// Proximal-Newton outer loop; returns whether it converged.
    fn solve(&mut self, beta: &mut [f64], cfg: &ElasticNetConfig) -> Result<bool> {
        let p = beta.len();
        let n = self.d.n() as f64;
        let l1 = cfg.lambda * cfg.l1_ratio;
        let l2 = cfg.lambda * (1.0 - cfg.l1_ratio);
        for _ in 0..200 {
            let pl = breslow_loglik_derivatives(self.x.view(), self.d.times(), self.d.events(), beta, true)?;
            let current = pl.loglik / n - cfg.penalty(beta);
            let anchor = beta.to_vec();
            let mut next = beta.to_vec();
            // Cyclic coordinate descent on the quadratic model around `anchor`.
            loop {
                if self.sweeps >= self.opts.max_iter {
                    return Ok(false);
                }
                self.sweeps += 1;
                let mut max_change: f64 = 0.0;
                for j in 0..p {
                    let a = pl.information[j * p + j] / n;
                    let mut cross = 0.0;
                    for k in 0..p {
                        if k != j {
                            cross += pl.information[j * p + k] * (next[k] - anchor[k]);
                        }
                    }
                    let c = (pl.gradient[j] - cross) / n + a * anchor[j];
                    let denom = a + l2;
                    let updated = if denom > 0.0 { soft_threshold(c, l1) / denom } else { 0.0 };
                    max_change = max_change.max((updated - next[j]).abs());
                    next[j] = updated;
                }
                if max_change < self.opts.tol * 0.1 {
                    break;
                }
            }
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..=20 {
                let cand: Vec<f64> = anchor.iter().zip(&next).map(|(a, b)| a + scale * (b - a)).collect();
                if let Ok(obj) = self.objective(&cand, cfg) {
                    if obj >= current - 1e-15 * current.abs() {
                        beta.copy_from_slice(&cand);
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            let moved = anchor.iter().zip(beta.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if !accepted || moved < self.opts.tol {
                return Ok(accepted || moved < self.opts.tol);
            }
        }
        Ok(false)
    }
}

/// Elastic-net penalized Cox fit on internally standardized features.
pub fn fit_coxnet(d: &SurvivalDataset, cfg: &ElasticNetConfig, opts: &CoxNetOptions) -> Result<CoxModel> {
    let mut models = coxnet_path(d, cfg.l1_ratio, &[cfg.lambda], opts)?;
    Ok(models.remove(0))
}

/// Warm-started fits along `lambdas` (expected in descending order).
pub fn coxnet_path(
    d: &SurvivalDataset,
    l1_ratio: f64,
    lambdas: &[f64],
    opts: &CoxNetOptions,
) -> Result<Vec<CoxModel>> {
    if d.n_events() == 0 {
        return Err(Error::NoEventsObserved);
    }
    let std = Standardization::fit(d.features());
    let x = std.apply(d.features());
    let mut solver = Solver { d, x, opts: *opts, sweeps: 0 };
    let mut beta = vec![0.0; d.p()];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = ElasticNetConfig::new(lambda, l1_ratio)?;
        solver.sweeps = 0;
        let converged = solver.solve(&mut beta, &cfg)?;
        out.push(CoxModel::from_standardized(d, std.clone(), &beta, converged, solver.sweeps)?);
    }
    Ok(out)
}
