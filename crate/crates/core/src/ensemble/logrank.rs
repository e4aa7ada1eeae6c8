use crate::error::{Error, Result};

/// Absolute standardized two-sample log-rank statistic.
///
/// Each side is a list of `(time, event)` observations. A zero variance
/// (no informative event times) yields 0.
pub fn logrank_split_statistic(left: &[(f64, bool)], right: &[(f64, bool)]) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::DegenerateSplit("both sides must be nonempty"));
    }
    let mut all: Vec<(f64, bool, bool)> = left
        .iter()
        .map(|&(t, e)| (t, e, true))
        .chain(right.iter().map(|&(t, e)| (t, e, false)))
        .collect();
    if !all.iter().any(|o| o.1) {
        return Err(Error::DegenerateSplit("no events in the combined group"));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk = all.len() as f64;
    let mut at_risk_left = left.len() as f64;
    let mut num = 0.0;
    let mut var = 0.0;
    let mut i = 0;
    while i < all.len() {
        let t = all[i].0;
        let (mut d, mut d_left, mut leaving, mut leaving_left) = (0.0, 0.0, 0.0, 0.0);
        while i < all.len() && all[i].0 == t {
            let (_, e, is_left) = all[i];
            leaving += 1.0;
            if is_left {
                leaving_left += 1.0;
            }
            if e {
                d += 1.0;
                if is_left {
                    d_left += 1.0;
                }
            }
            i += 1;
        }
        if d > 0.0 {
            let frac = at_risk_left / at_risk;
            num += d_left - d * frac;
            if at_risk > 1.0 {
                var += d * frac * (1.0 - frac) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leaving;
        at_risk_left -= leaving_left;
    }
    if var <= 0.0 {
        return Ok(0.0);
    }
    Ok(num.abs() / var.sqrt())
}

/// Incremental log-rank evaluation for one tree node.
///
/// Subjects are mapped to `slot = number of node event times <= t`, so a
/// subject is at risk at event time `j` iff `slot > j`, and its event (if
/// any) happened at `j = slot - 1`.
pub(crate) struct NodeLogRank {
    /// Per event time: total at risk and total events.
    at_risk: Vec<f64>,
    deaths: Vec<f64>,
    left_slots: Vec<f64>,
    left_deaths: Vec<f64>,
    pub left_n: usize,
    pub left_events: usize,
}

impl NodeLogRank {
    /// `slots[i]` and `events[i]` for every subject in the node.
    pub fn new(slots: &[usize], events: &[bool], n_event_times: usize) -> Self {
        let mut slot_counts = vec![0.0; n_event_times + 1];
        let mut deaths = vec![0.0; n_event_times];
        for (&s, &e) in slots.iter().zip(events) {
            slot_counts[s] += 1.0;
            if e {
                deaths[s - 1] += 1.0;
            }
        }
        let mut at_risk = vec![0.0; n_event_times];
        let mut acc = 0.0;
        for j in (0..n_event_times).rev() {
            acc += slot_counts[j + 1];
            at_risk[j] = acc;
        }
        Self {
            at_risk,
            deaths,
            left_slots: vec![0.0; n_event_times + 1],
            left_deaths: vec![0.0; n_event_times],
            left_n: 0,
            left_events: 0,
        }
    }

    pub fn reset(&mut self) {
        self.left_slots.iter_mut().for_each(|v| *v = 0.0);
        self.left_deaths.iter_mut().for_each(|v| *v = 0.0);
        self.left_n = 0;
        self.left_events = 0;
    }

    pub fn move_left(&mut self, slot: usize, event: bool) {
        self.left_slots[slot] += 1.0;
        self.left_n += 1;
        if event {
            self.left_deaths[slot - 1] += 1.0;
            self.left_events += 1;
        }
    }

    pub fn statistic(&self) -> f64 {
        let mut num = 0.0;
        let mut var = 0.0;
        let mut left_at_risk = 0.0;
        for j in (0..self.deaths.len()).rev() {
            left_at_risk += self.left_slots[j + 1];
            let (y, d) = (self.at_risk[j], self.deaths[j]);
            if d == 0.0 {
                continue;
            }
            let frac = left_at_risk / y;
            num += self.left_deaths[j] - d * frac;
            if y > 1.0 {
                var += d * frac * (1.0 - frac) * (y - d) / (y - 1.0);
            }
        }
        if var <= 0.0 {
            0.0
        } else {
            num.abs() / var.sqrt()
        }
    }
}
