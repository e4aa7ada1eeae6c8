//! Nonparametric estimators: Kaplan-Meier, Nelson-Aalen, Breslow and the
//! censoring survival used for IPCW weights.
//!
//! Tied event times share one risk set (Breslow convention) throughout.

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::prediction::RiskVector;
use crate::step::StepFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierCurve {
    pub curve: StepFunction,
    pub at_risk: Vec<usize>,
    pub events_at: Vec<usize>,
}

/// Distinct event times with the risk-set size and event count at each.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EventTable {
    pub times: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
}

pub(crate) fn event_table(times: &[f64], events: &[bool]) -> EventTable {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let n = times.len();
    let mut table = EventTable { times: Vec::new(), at_risk: Vec::new(), events: Vec::new() };
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < n && times[order[j]] == t {
            d += usize::from(events[order[j]]);
            j += 1;
        }
        if d > 0 {
            table.times.push(t);
            table.at_risk.push(n - i);
            table.events.push(d);
        }
        i = j;
    }
    table
}

fn product_limit(times: &[f64], events: &[bool]) -> KaplanMeierCurve {
    let table = event_table(times, events);
    let mut s = 1.0;
    let values = table
        .at_risk
        .iter()
        .zip(&table.events)
        .map(|(&n, &d)| {
            s *= 1.0 - d as f64 / n as f64;
            s
        })
        .collect();
    KaplanMeierCurve {
        curve: StepFunction::new(table.times, values, 1.0).expect("product-limit knots are increasing"),
        at_risk: table.at_risk,
        events_at: table.events,
    }
}

pub fn kaplan_meier(d: &SurvivalDataset) -> KaplanMeierCurve {
    product_limit(d.times(), d.events())
}

/// Kaplan-Meier of the censoring distribution, `G(t)`.
pub fn censoring_survival(d: &SurvivalDataset) -> KaplanMeierCurve {
    let inverted: Vec<bool> = d.events().iter().map(|e| !e).collect();
    product_limit(d.times(), &inverted)
}

pub(crate) fn nelson_aalen_raw(times: &[f64], events: &[bool]) -> StepFunction {
    let table = event_table(times, events);
    let mut h = 0.0;
    let values = table
        .at_risk
        .iter()
        .zip(&table.events)
        .map(|(&n, &d)| {
            h += d as f64 / n as f64;
            h
        })
        .collect();
    StepFunction::new(table.times, values, 0.0).expect("event times are increasing")
}

pub fn nelson_aalen(d: &SurvivalDataset) -> StepFunction {
    nelson_aalen_raw(d.times(), d.events())
}

/// Breslow cumulative baseline hazard for log-relative-hazard `risks`.
///
/// Survival of a subject with risk `r` is `exp(-H0(t) * exp(r))`.
pub fn breslow_baseline(d: &SurvivalDataset, risks: &RiskVector) -> Result<StepFunction> {
    if risks.len() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: risks.len() });
    }
    breslow_raw(d.times(), d.events(), risks.as_slice())
}

pub(crate) fn breslow_raw(times: &[f64], events: &[bool], risks: &[f64]) -> Result<StepFunction> {
    let shift = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::OverflowGuard);
    }
    let weights: Vec<f64> = risks.iter().map(|r| (r - shift).exp()).collect();
    let unshift = (-shift).exp();
    if weights.iter().any(|w| !w.is_finite()) || !unshift.is_finite() {
        return Err(Error::OverflowGuard);
    }

    // Walk from the latest time back, accumulating the risk-set weight.
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut knots = Vec::new();
    let mut increments = Vec::new();
    let mut risk_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut d = 0usize;
        while i < order.len() && times[order[i]] == t {
            risk_sum += weights[order[i]];
            d += usize::from(events[order[i]]);
            i += 1;
        }
        if d > 0 {
            knots.push(t);
            increments.push(d as f64 / risk_sum);
        }
    }
    knots.reverse();
    increments.reverse();
    let mut h = 0.0;
    let values: Vec<f64> = increments
        .into_iter()
        .map(|inc| {
            h += inc;
            h * unshift
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::OverflowGuard);
    }
    StepFunction::new(knots, values, 0.0)
}
