//! Datasets, evaluation grids and event-time quantiles.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features plus right-censored outcomes.
///
/// `events[i] == true` means the event was observed at `times[i]`;
/// `false` means subject `i` was censored at that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    features: Array2<f64>,
    times: Vec<f64>,
    events: Vec<bool>,
    feature_names: Vec<String>,
}

/// Checks every dataset invariant, reporting the first offending index.
pub fn validate_dataset(
    features: ArrayView2<'_, f64>,
    times: &[f64],
    events: &[bool],
) -> Result<()> {
    let n = features.nrows();
    if n == 0 || times.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if features.ncols() == 0 {
        return Err(Error::LengthMismatch { index: 0, what: "feature matrix has no columns" });
    }
    if times.len() != n {
        return Err(Error::LengthMismatch { index: n.min(times.len()), what: "times vs feature rows" });
    }
    if events.len() != n {
        return Err(Error::LengthMismatch { index: n.min(events.len()), what: "events vs feature rows" });
    }
    if let Some(index) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::NonPositiveTime { index });
    }
    for (row, r) in features.axis_iter(Axis(0)).enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

impl SurvivalDataset {
    pub fn new(features: Array2<f64>, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_names(features, times, events, names)
    }

    pub fn with_names(
        features: Array2<f64>,
        times: Vec<f64>,
        events: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        validate_dataset(features.view(), &times, &events)?;
        if feature_names.len() != features.ncols() {
            return Err(Error::LengthMismatch { index: feature_names.len(), what: "feature names vs columns" });
        }
        Ok(Self { features, times, events, feature_names })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.n() as f64
    }

    /// Rows `indices`, in that order (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            times: indices.iter().map(|&i| self.times[i]).collect(),
            events: indices.iter().map(|&i| self.events[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same dataset with a new feature matrix (same row count).
    pub fn with_features(&self, features: Array2<f64>, names: Vec<String>) -> Result<Self> {
        Self::with_names(features, self.times.clone(), self.events.clone(), names)
    }

    /// Same subjects with every event flag flipped.
    pub fn with_events_inverted(&self) -> Self {
        Self {
            features: self.features.clone(),
            times: self.times.clone(),
            events: self.events.iter().map(|e| !e).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Subject indices ordered by (time ascending, event first, index).
    pub fn time_order(&self) -> Vec<usize> {
        sorted_time_order(&self.times, &self.events)
    }
}

pub(crate) fn sorted_time_order(times: &[f64], events: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| {
        times[a]
            .total_cmp(&times[b])
            .then_with(|| events[b].cmp(&events[a]))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Strictly increasing, positive evaluation abscissa for survival curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(i) = knots.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidGrid(format!("knot {i} is not a positive finite time")));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!("knots {i} and {} are not increasing", i + 1)));
        }
        Ok(Self { knots })
    }

    /// `size` quantiles of the observed event times, at levels evenly spaced
    /// over [0, 1] so the first and last event times are both knots.
    /// Duplicate quantiles collapse, so the grid may be shorter than `size`.
    pub fn from_event_quantiles(d: &SurvivalDataset, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidGrid("grid size must be positive".into()));
        }
        let sorted = sorted_event_times(d)?;
        let mut knots: Vec<f64> = (0..size)
            .map(|k| {
                let q = if size == 1 { 0.5 } else { k as f64 / (size - 1) as f64 };
                quantile_sorted(&sorted, q)
            })
            .collect();
        knots.dedup_by(|a, b| *a <= *b);
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Index of the largest knot `<= t`, or `None` when `t` precedes the grid.
    pub fn locate(&self, t: f64) -> Option<usize> {
        self.knots.partition_point(|&k| k <= t).checked_sub(1)
    }

    /// Index of the largest knot `< t`.
    pub fn locate_left(&self, t: f64) -> Option<usize> {
        self.knots.partition_point(|&k| k < t).checked_sub(1)
    }
}

fn sorted_event_times(d: &SurvivalDataset) -> Result<Vec<f64>> {
    let mut ev: Vec<f64> = d
        .times()
        .iter()
        .zip(d.events())
        .filter_map(|(&t, &e)| e.then_some(t))
        .collect();
    if ev.is_empty() {
        return Err(Error::NoEventsObserved);
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Linear interpolation between order statistics (R's type 7).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Empirical quantiles of the uncensored event times.
pub fn event_time_quantiles(d: &SurvivalDataset, qs: &[f64]) -> Result<Vec<f64>> {
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::InvalidArgument(format!("quantile level {q} is outside (0, 1)")));
    }
    let sorted = sorted_event_times(d)?;
    Ok(qs.iter().map(|&q| quantile_sorted(&sorted, q)).collect())
}
