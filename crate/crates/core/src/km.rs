//! Product-limit estimation of the event-time survival function and, with the
//! indicators reversed, of the censoring survival function.
//!
//! Tie convention: at a time shared by events and censorings the events are
//! processed first, so a subject censored at `t` is still in the risk set at `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};
use crate::sample::SurvivalSample;

/// Right-continuous, piecewise-constant survival estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// Strictly increasing times at which the estimate drops.
    pub jump_times: Vec<f64>,
    /// Estimate on `[jump_times[j], jump_times[j + 1])`.
    pub values: Vec<f64>,
    /// Risk-set size just before each jump.
    pub at_risk: Vec<usize>,
    /// Number of "events" at each jump.
    pub n_events: Vec<usize>,
    /// Greenwood increments `d / (Y (Y - d))`; zero where the risk set is exhausted.
    pub variance_terms: Vec<f64>,
    /// Largest observed time (event or censored) in the fitted data.
    pub max_time: f64,
    /// Number of subjects the estimate was fitted on.
    pub n: usize,
    /// Set when the fitted data contained no events, leaving the estimate at 1.
    pub no_events: bool,
}

impl StepFunction {
    /// The constant-one function with no jumps.
    pub fn constant_one(max_time: f64, n: usize) -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
            at_risk: Vec::new(),
            n_events: Vec::new(),
            variance_terms: Vec::new(),
            max_time,
            n,
            no_events: true,
        }
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// `S(t)`: the value at the largest jump time `<= t`, or 1 before the first jump.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&u| u <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// `S(t-)`: the value at the largest jump time strictly below `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&u| u < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Exact integral of the step function over `[0, upper]`.
    pub fn integral(&self, upper: f64) -> f64 {
        let mut area = 0.0;
        let mut last_t = 0.0;
        let mut level = 1.0;
        for (&t, &v) in self.jump_times.iter().zip(&self.values) {
            if t > upper {
                break;
            }
            area += level * (t - last_t);
            last_t = t;
            level = v;
        }
        area + level * (upper - last_t)
    }

    /// Sup-norm distance between two step functions, checking both sides of every jump.
    pub fn max_abs_difference(&self, other: &StepFunction) -> f64 {
        let mut points: Vec<f64> = self
            .jump_times
            .iter()
            .chain(&other.jump_times)
            .copied()
            .collect();
        points.sort_by(f64::total_cmp);
        points
            .iter()
            .flat_map(|&t| {
                [
                    (self.eval(t) - other.eval(t)).abs(),
                    (self.left_limit(t) - other.left_limit(t)).abs(),
                ]
            })
            .fold(0.0, f64::max)
    }
}

/// Product-limit estimator over parallel slices of times and "event" flags.
pub(crate) fn product_limit(times: &[f64], events: &[bool]) -> StepFunction {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let max_time = order.last().map_or(0.0, |&i| times[i]);

    let mut out = StepFunction::constant_one(max_time, n);
    let mut remaining = n;
    let mut surv = 1.0;
    let mut k = 0;
    while k < n {
        let t = times[order[k]];
        let mut d = 0usize;
        let mut tied = 0usize;
        while k + tied < n && times[order[k + tied]] == t {
            if events[order[k + tied]] {
                d += 1;
            }
            tied += 1;
        }
        if d > 0 {
            surv *= 1.0 - d as f64 / remaining as f64;
            out.jump_times.push(t);
            out.values.push(surv);
            out.at_risk.push(remaining);
            out.n_events.push(d);
            let term = if remaining > d {
                d as f64 / (remaining as f64 * (remaining - d) as f64)
            } else {
                0.0
            };
            out.variance_terms.push(term);
        }
        remaining -= tied;
        k += tied;
    }
    out.no_events = out.jump_times.is_empty();
    out
}

fn check_times(samples: &[SurvivalSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(RmstError::Empty(
            "Kaplan-Meier fit needs at least one sample",
        ));
    }
    if let Some(bad) = samples.iter().find(|s| !s.time.is_finite() || s.time < 0.0) {
        return Err(RmstError::InvalidInput(format!(
            "subject {}: time must be finite and non-negative, got {}",
            bad.id, bad.time
        )));
    }
    Ok(())
}

/// Kaplan-Meier estimate of the event-time survival function.
pub fn km_fit(samples: &[SurvivalSample]) -> Result<StepFunction> {
    check_times(samples)?;
    let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let events: Vec<bool> = samples.iter().map(|s| s.event).collect();
    Ok(product_limit(&times, &events))
}

/// Reverse Kaplan-Meier: the survival function of the censoring time.
///
/// A subject with a true event at `t` remains in the risk set for a censoring
/// jump at `t`, so this equals `km_fit` on the indicator-flipped data.
pub fn censoring_km(samples: &[SurvivalSample]) -> Result<StepFunction> {
    check_times(samples)?;
    let times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    let censored: Vec<bool> = samples.iter().map(|s| !s.event).collect();
    Ok(product_limit(&times, &censored))
}
