//! Synthetic time-to-event generators.
//!
//! Three families over 20 standard-normal features on the time window
//! (0, 10]:
//!
//! - **LinPH**: proportional hazards, log-risk linear in `x1..x8`.
//! - **NonLinPH**: proportional hazards, log-risk `x1 + x2*x3 + cos(6*x4)`.
//! - **NonPH**: the window is cut into 16 equal intervals and the event
//!   lands at the right edge of interval `i` with probability
//!   `softmax(16 * x1..x16)_i`, so survival curves are piecewise constant on
//!   the intervals and cross freely.
//!
//! The PH families share a baseline cumulative hazard built from random
//! positive increments on 64 equal bins, scaled so that `H0(10) = 3`.

use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::step::StepFunction;

pub const N_FEATURES: usize = 20;
pub const TIME_HORIZON: f64 = 10.0;
pub const N_INTERVALS: usize = 16;
const BASELINE_BINS: usize = 64;
const BASELINE_TOTAL: f64 = 3.0;
const LINPH_INFORMATIVE: usize = 8;
const LINPH_COEF_NORM: f64 = 2.0;

// Stream identifiers under the dataset seed.
const STREAM_FEATURES: u64 = 1;
const STREAM_BASELINE: u64 = 2;
const STREAM_COEFS: u64 = 3;
const STREAM_EVENTS: u64 = 4;
const STREAM_CENSORING: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[serde(rename = "linph")]
    LinPh,
    #[serde(rename = "nonlinph")]
    NonLinPh,
    #[serde(rename = "nonph")]
    NonPh,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::LinPh => "linph",
            GeneratorKind::NonLinPh => "nonlinph",
            GeneratorKind::NonPh => "nonph",
        }
    }

    pub fn is_ph(self) -> bool {
        !matches!(self, GeneratorKind::NonPh)
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linph" => Ok(GeneratorKind::LinPh),
            "nonlinph" => Ok(GeneratorKind::NonLinPh),
            "nonph" => Ok(GeneratorKind::NonPh),
            other => Err(Error::InvalidArgument(format!("unknown generator kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    pub censoring_fraction: f64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64, censoring_fraction: f64) -> Self {
        Self { kind, n, seed, censoring_fraction }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("generator needs n >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.censoring_fraction) {
            return Err(Error::InvalidArgument("censoring fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-subject generating law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SubjectTruth {
    /// Log-relative hazard against the shared baseline.
    Ph { risk: f64 },
    /// Event probability per interval.
    NonPh { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: GeneratorKind,
    pub subjects: Vec<SubjectTruth>,
    pub baseline_cumhaz: Option<StepFunction>,
    pub linear_coefficients: Option<Vec<f64>>,
    /// Event times before censoring was applied.
    pub latent_times: Vec<f64>,
}

impl GroundTruth {
    /// True log-risks (PH kinds only).
    pub fn risks(&self) -> Option<Vec<f64>> {
        self.subjects
            .iter()
            .map(|s| match s {
                SubjectTruth::Ph { risk } => Some(*risk),
                SubjectTruth::NonPh { .. } => None,
            })
            .collect()
    }

    /// True survival of subject `i` at `t`.
    pub fn survival(&self, i: usize, t: f64) -> f64 {
        match &self.subjects[i] {
            SubjectTruth::Ph { risk } => {
                let h0 = self.baseline_cumhaz.as_ref().map_or(0.0, |b| b.eval(t));
                (-h0 * risk.exp()).exp()
            }
            SubjectTruth::NonPh { probs } => nonph_survival(probs, t),
        }
    }
}

fn interval_width() -> f64 {
    TIME_HORIZON / N_INTERVALS as f64
}

fn nonph_survival(probs: &[f64], t: f64) -> f64 {
    let passed = ((t / interval_width()) + 1e-12).floor() as usize;
    1.0 - probs.iter().take(passed.min(N_INTERVALS)).sum::<f64>()
}

/// Random baseline cumulative hazard on (0, 10]: |N(0,1)| increments on 64
/// equal bins, scaled so the total is 3.
pub fn gen_baseline_cumhaz(seed: u64) -> StepFunction {
    let mut rng = stream(seed, &[STREAM_BASELINE]);
    let incs: Vec<f64> = (0..BASELINE_BINS)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z.abs()
        })
        .collect();
    let total: f64 = incs.iter().sum();
    let width = TIME_HORIZON / BASELINE_BINS as f64;
    let knots: Vec<f64> = (1..=BASELINE_BINS).map(|k| k as f64 * width).collect();
    let mut acc = 0.0;
    let mut values: Vec<f64> = incs
        .iter()
        .map(|v| {
            acc += v;
            acc / total * BASELINE_TOTAL
        })
        .collect();
    values[BASELINE_BINS - 1] = BASELINE_TOTAL;
    StepFunction::cumulative_hazard(knots, values).expect("increments are non-negative")
}

/// `sum_{k<8} coefs[k] * x[k]`.
pub fn risk_linph(x: &[f64], coefs: &[f64]) -> f64 {
    x.iter().zip(coefs).take(LINPH_INFORMATIVE).map(|(a, b)| a * b).sum()
}

/// `x1 + x2 * x3 + cos(6 * x4)`.
pub fn risk_nonlinph(x: &[f64]) -> f64 {
    x[0] + x[1] * x[2] + (6.0 * x[3]).cos()
}

/// Softmax of `16 * x1..x16`.
pub fn interval_probs_nonph(x: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = x[..N_INTERVALS].iter().map(|v| 16.0 * v).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn linph_coefficients(seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, &[STREAM_COEFS]);
    let raw: Vec<f64> = (0..LINPH_INFORMATIVE).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm * LINPH_COEF_NORM).collect()
}

/// Inverse-transform draw of one event time from uniform `u` in (0, 1).
///
/// Returns `(time, observed)`; PH subjects whose survival at the horizon
/// stays above `u` come back censored at 10.
pub fn sample_event_time(truth: &SubjectTruth, baseline: Option<&StepFunction>, u: f64) -> Result<(f64, bool)> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("uniform draw {u} outside (0, 1)")));
    }
    match truth {
        SubjectTruth::Ph { risk } => {
            let baseline = baseline.ok_or_else(|| Error::InvalidArgument("PH sampling needs a baseline".into()))?;
            // S(t) <= u  <=>  H0(t) >= -ln(u) * exp(-risk)
            let target = -u.ln() * (-risk).exp();
            let idx = baseline.values().partition_point(|&h| h < target);
            if idx == baseline.knots().len() {
                Ok((TIME_HORIZON, false))
            } else {
                Ok((baseline.knots()[idx], true))
            }
        }
        SubjectTruth::NonPh { probs } => {
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            Ok(((chosen + 1) as f64 * interval_width(), true))
        }
    }
}

/// Uniform censoring on (0, c_max], with `c_max` bisected until the censored
/// fraction is within `max(0.01, 1/n)` of `target_fraction`. Subjects already
/// censored (administratively) stay censored.
pub fn apply_censoring(
    times: &[f64],
    events: &[bool],
    seed: u64,
    target_fraction: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(0.0..1.0).contains(&target_fraction) {
        return Err(Error::InvalidArgument("target fraction must lie in [0, 1)".into()));
    }
    let n = times.len();
    if n == 0 || events.len() != n {
        return Err(Error::InvalidArgument("times and events must be nonempty and equally long".into()));
    }
    let tol = 0.01f64.max(1.0 / n as f64);
    let mut rng = stream(seed, &[STREAM_CENSORING]);
    let unif: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();

    let censored_at = |c_max: f64| -> usize {
        (0..n).filter(|&i| !events[i] || unif[i] * c_max < times[i]).count()
    };
    let admin = events.iter().filter(|e| !**e).count() as f64 / n as f64;
    if admin > target_fraction + tol {
        return Err(Error::CalibrationFailed(format!(
            "{:.3} already censored before calibration, target {target_fraction}",
            admin
        )));
    }
    let c_max = if admin >= target_fraction - tol {
        f64::INFINITY
    } else {
        let max_t = times.iter().copied().fold(0.0, f64::max);
        let min_u = unif.iter().copied().fold(1.0, f64::min);
        let (mut lo, mut hi) = (0.0f64, max_t / min_u * 2.0);
        let mut found = None;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let frac = censored_at(mid) as f64 / n as f64;
            if (frac - target_fraction).abs() <= tol {
                found = Some(mid);
                break;
            }
            if frac > target_fraction {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        found.ok_or_else(|| Error::CalibrationFailed(format!("no c_max reaches fraction {target_fraction}")))?
    };
    let mut out_t = times.to_vec();
    let mut out_e = events.to_vec();
    for i in 0..n {
        let c = unif[i] * c_max;
        if c < times[i] {
            out_t[i] = c;
            out_e[i] = false;
        }
    }
    Ok((out_t, out_e))
}

/// Draws a dataset and its generating law.
pub fn generate(spec: &GeneratorSpec) -> Result<(SurvivalDataset, GroundTruth)> {
    spec.validate()?;
    let n = spec.n;
    let mut frng = stream(spec.seed, &[STREAM_FEATURES]);
    let x = Array2::from_shape_fn((n, N_FEATURES), |_| StandardNormal.sample(&mut frng));

    let (subjects, baseline, coefs) = match spec.kind {
        GeneratorKind::LinPh => {
            let coefs = linph_coefficients(spec.seed);
            let subjects = x
                .rows()
                .into_iter()
                .map(|r| SubjectTruth::Ph { risk: risk_linph(r.as_slice().expect("row-major"), &coefs) })
                .collect();
            (subjects, Some(gen_baseline_cumhaz(spec.seed)), Some(coefs))
        }
        GeneratorKind::NonLinPh => {
            let subjects = x
                .rows()
                .into_iter()
                .map(|r| SubjectTruth::Ph { risk: risk_nonlinph(r.as_slice().expect("row-major")) })
                .collect();
            (subjects, Some(gen_baseline_cumhaz(spec.seed)), None)
        }
        GeneratorKind::NonPh => {
            let subjects = x
                .rows()
                .into_iter()
                .map(|r| SubjectTruth::NonPh { probs: interval_probs_nonph(r.as_slice().expect("row-major")) })
                .collect();
            (subjects, None, None)
        }
    };

    let mut erng = stream(spec.seed, &[STREAM_EVENTS]);
    let mut latent = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    for s in &subjects {
        let u: f64 = erng.gen_range(f64::MIN_POSITIVE..1.0);
        let (t, e) = sample_event_time(s, baseline.as_ref(), u)?;
        latent.push(t);
        observed.push(e);
    }
    let (times, events) = apply_censoring(&latent, &observed, spec.seed, spec.censoring_fraction)?;
    let dataset = SurvivalDataset::new(x, times, events)?;
    let truth = GroundTruth {
        kind: spec.kind,
        subjects,
        baseline_cumhaz: baseline,
        linear_coefficients: coefs,
        latent_times: latent,
    };
    Ok((dataset, truth))
}

/// Indices of a stratified sample: exactly `round(n * censored_fraction)`
/// censored subjects and the rest uncensored, then shuffled.
pub fn subsample_pool_indices(
    pool: &SurvivalDataset,
    n: usize,
    seed: u64,
    censored_fraction: f64,
) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&censored_fraction) {
        return Err(Error::InvalidArgument("censored fraction must lie in [0, 1]".into()));
    }
    let n_cens = (n as f64 * censored_fraction).round() as usize;
    let n_event = n - n_cens;
    let censored: Vec<usize> = (0..pool.n()).filter(|&i| !pool.events()[i]).collect();
    let observed: Vec<usize> = (0..pool.n()).filter(|&i| pool.events()[i]).collect();
    if censored.len() < n_cens {
        return Err(Error::InsufficientStratum { stratum: "censored", needed: n_cens, available: censored.len() });
    }
    if observed.len() < n_event {
        return Err(Error::InsufficientStratum { stratum: "uncensored", needed: n_event, available: observed.len() });
    }
    let mut rng = stream(seed, &[]);
    let mut picked: Vec<usize> = index::sample(&mut rng, censored.len(), n_cens)
        .into_iter()
        .map(|k| censored[k])
        .chain(index::sample(&mut rng, observed.len(), n_event).into_iter().map(|k| observed[k]))
        .collect();
    picked.shuffle(&mut rng);
    Ok(picked)
}

pub fn subsample_pool(pool: &SurvivalDataset, n: usize, seed: u64, censored_fraction: f64) -> Result<SurvivalDataset> {
    Ok(pool.subset(&subsample_pool_indices(pool, n, seed, censored_fraction)?))
}
