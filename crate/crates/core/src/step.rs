//! Right-continuous piecewise-constant functions of time.

use serde::{Deserialize, Serialize};

use crate::data::TimeGrid;
use crate::error::{Error, Result};

/// `f(t)` is the value at the largest knot `<= t`, or `before` when `t`
/// precedes every knot. An empty knot list is the constant `before`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    before: f64,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, before: f64) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidStepFunction(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.iter().chain(&values).chain([&before]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidStepFunction("non-finite knot or value".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidStepFunction("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, values, before })
    }

    /// Survival-mode function: starts at 1, non-increasing, inside [0, 1].
    pub fn survival(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(knots, values, 1.0)?;
        if !f.is_survival() {
            return Err(Error::InvalidStepFunction("not a survival curve".into()));
        }
        Ok(f)
    }

    /// Cumulative-hazard-mode function: starts at 0, non-decreasing, >= 0.
    pub fn cumulative_hazard(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(knots, values, 0.0)?;
        if !f.is_cumulative_hazard() {
            return Err(Error::InvalidStepFunction("not a cumulative hazard".into()));
        }
        Ok(f)
    }

    pub fn constant(value: f64) -> Self {
        Self { knots: Vec::new(), values: Vec::new(), before: value }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_before_first_knot(&self) -> f64 {
        self.before
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => self.before,
            i => self.values[i - 1],
        }
    }

    /// Left limit `f(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k < t) {
            0 => self.before,
            i => self.values[i - 1],
        }
    }

    /// Values at every knot of `grid`, in a single merge pass.
    pub fn eval_on_grid(&self, grid: &TimeGrid) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        let mut i = 0;
        let mut current = self.before;
        for &t in grid.knots() {
            while i < self.knots.len() && self.knots[i] <= t {
                current = self.values[i];
                i += 1;
            }
            out.push(current);
        }
        out
    }

    /// Pointwise map of the values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            before: f(self.before),
        }
    }

    /// Adds a knot carrying the value already in force at `t`.
    pub fn refined(&self, t: f64) -> Self {
        if self.knots.binary_search_by(|k| k.total_cmp(&t)).is_ok() {
            return self.clone();
        }
        let i = self.knots.partition_point(|&k| k < t);
        let mut knots = self.knots.clone();
        let mut values = self.values.clone();
        knots.insert(i, t);
        values.insert(i, self.eval(t));
        Self { knots, values, before: self.before }
    }

    pub fn is_survival(&self) -> bool {
        self.before == 1.0
            && self.values.iter().all(|v| (0.0..=1.0).contains(v))
            && self.values.first().map_or(true, |&v| v <= 1.0)
            && self.values.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn is_cumulative_hazard(&self) -> bool {
        self.before == 0.0
            && self.values.iter().all(|&v| v >= 0.0)
            && self.values.windows(2).all(|w| w[1] >= w[0])
    }
}
