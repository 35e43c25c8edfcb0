//! Leave-one-out pseudo-survival-times and their regression.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Result, RmstError};
use crate::fit::{FitWarning, Link, RegressionFit};
use crate::gee::{self, EstimatingEquation, Multiplier};
use crate::km::StepFunction;
use crate::linalg::check_full_rank;
use crate::sample::SurvivalSample;

/// What to do when `tau` lies beyond the last observed time of a leave-one-out subsample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeyondFollowUp {
    #[default]
    Error,
    /// Hold the last Kaplan-Meier value constant up to `tau`.
    CarryForward,
}

impl std::str::FromStr for BeyondFollowUp {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "error" => Ok(Self::Error),
            "carry-forward" => Ok(Self::CarryForward),
            o => Err(format!("unknown beyond-follow-up policy '{o}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoOptions {
    pub beyond_follow_up: BeyondFollowUp,
    /// Spread the leave-one-out fits over the rayon pool.
    pub parallel: bool,
}

impl Default for PseudoOptions {
    fn default() -> Self {
        Self {
            beyond_follow_up: BeyondFollowUp::Error,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoValueSet {
    pub values: Vec<f64>,
    pub tau: f64,
    pub pooled_rmst: f64,
}

impl PseudoValueSet {
    /// Empirical survival function of the pseudo-values, treating each as an
    /// observed event time.
    pub fn survival_curve(&self) -> StepFunction {
        crate::km::product_limit(&self.values, &vec![true; self.values.len()])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Writes `id,time,event,group,pseudo_value`.
    pub fn write_csv<W: Write>(&self, samples: &[SurvivalSample], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| RmstError::Io(e.to_string());
        w.write_record(["id", "time", "event", "group", "pseudo_value"])
            .map_err(io)?;
        for (s, v) in samples.iter().zip(&self.values) {
            w.write_record([
                s.id.clone(),
                s.time.to_string(),
                u8::from(s.event).to_string(),
                s.group.to_string(),
                v.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Time-sorted view of a sample for repeated leave-one-out integration.
struct SortedSample {
    times: Vec<f64>,
    events: Vec<bool>,
    /// `position[i]` = sorted position of input subject `i`.
    position: Vec<usize>,
}

impl SortedSample {
    fn new(samples: &[SurvivalSample]) -> Self {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| samples[a].time.total_cmp(&samples[b].time));
        let mut position = vec![0; samples.len()];
        for (k, &i) in order.iter().enumerate() {
            position[i] = k;
        }
        Self {
            times: order.iter().map(|&i| samples[i].time).collect(),
            events: order.iter().map(|&i| samples[i].event).collect(),
            position,
        }
    }

    /// Kaplan-Meier area on `[0, tau]` without sorted entry `skip`.
    /// Returns `(area, any_event, observable_until)`, where the last is the
    /// largest time, or infinity once the estimate has reached zero.
    fn area_without(&self, skip: Option<usize>, tau: f64) -> (f64, bool, f64) {
        let n = self.times.len();
        let mut remaining = n - usize::from(skip.is_some());
        let mut surv = 1.0;
        let mut area = 0.0;
        let mut last_t = 0.0;
        let mut any_event = false;
        let mut largest = f64::NEG_INFINITY;
        let mut exhausted = false;
        let mut k = 0;
        while k < n {
            let t = self.times[k];
            let mut d = 0usize;
            let mut tied = 0usize;
            let mut j = k;
            while j < n && self.times[j] == t {
                if Some(j) != skip {
                    tied += 1;
                    if self.events[j] {
                        d += 1;
                    }
                }
                j += 1;
            }
            if tied > 0 {
                largest = t;
            }
            if d > 0 {
                any_event = true;
                if t <= tau {
                    area += surv * (t - last_t);
                    last_t = t;
                    surv *= 1.0 - d as f64 / remaining as f64;
                }
                if d == remaining {
                    exhausted = true;
                }
            }
            remaining -= tied;
            k = j;
        }
        if last_t < tau {
            area += surv * (tau - last_t);
        }
        (
            area,
            any_event,
            if exhausted { f64::INFINITY } else { largest },
        )
    }
}

pub fn pseudo_values(samples: &[SurvivalSample], tau: f64) -> Result<PseudoValueSet> {
    pseudo_values_with(samples, tau, PseudoOptions::default())
}

/// Pseudo-survival-times `n mu(tau) - (n - 1) mu^{-i}(tau)` on the pooled sample.
pub fn pseudo_values_with(
    samples: &[SurvivalSample],
    tau: f64,
    options: PseudoOptions,
) -> Result<PseudoValueSet> {
    if samples.len() < 2 {
        return Err(RmstError::InvalidInput(
            "pseudo-values need at least two subjects".into(),
        ));
    }
    crate::sample::validate(samples)?;
    let sorted = SortedSample::new(samples);
    let (pooled, any_event, _) = sorted.area_without(None, tau);
    if !any_event {
        return Err(RmstError::NoEvents("pooled sample".into()));
    }
    crate::rmst::check_tau(tau, crate::sample::largest_time(samples))?;

    let n = samples.len() as f64;
    let one = |i: usize| -> Result<f64> {
        let (area, any_event, largest) = sorted.area_without(Some(sorted.position[i]), tau);
        if !any_event {
            return Err(RmstError::LeaveOneOut {
                subject: samples[i].id.clone(),
                reason: "no events remain".into(),
            });
        }
        if tau > largest && options.beyond_follow_up == BeyondFollowUp::Error {
            return Err(RmstError::LeaveOneOut {
                subject: samples[i].id.clone(),
                reason: format!("tau {tau} exceeds remaining follow-up {largest}"),
            });
        }
        Ok(n * pooled - (n - 1.0) * area)
    };
    let values = if options.parallel {
        (0..samples.len())
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..samples.len()).map(one).collect::<Result<Vec<_>>>()?
    };
    Ok(PseudoValueSet {
        values,
        tau,
        pooled_rmst: pooled,
    })
}

fn equation<'a>(
    pv: &'a PseudoValueSet,
    design: &'a Design,
    ones: &'a [f64],
    link: Link,
) -> EstimatingEquation<'a> {
    EstimatingEquation {
        z: &design.matrix,
        y: &pv.values,
        w: ones,
        link,
        multiplier: Multiplier::MeanDerivative,
    }
}

/// Regression of pseudo-values on `design` via generalized estimating equations.
pub fn fit_pseudo_gee(pv: &PseudoValueSet, design: &Design, link: Link) -> Result<RegressionFit> {
    if design.nrows() != pv.values.len() {
        return Err(RmstError::InvalidInput(format!(
            "design has {} rows for {} pseudo-values",
            design.nrows(),
            pv.values.len()
        )));
    }
    check_full_rank(&design.matrix)?;
    let ones = vec![1.0; pv.values.len()];
    let eq = equation(pv, design, &ones, link);
    let sol = eq.solve()?;
    let covariance = gee::sandwich(&eq.bread(&sol.beta), &eq.contributions(&sol.beta))?;

    let mut warnings = Vec::new();
    if link == Link::Log {
        let count = pv.values.iter().filter(|&&v| v <= 0.0).count();
        if count > 0 {
            warnings.push(FitWarning::NonPositiveResponse { count });
        }
        let fitted = &design.matrix * &sol.beta;
        let bad = fitted
            .iter()
            .filter(|e| !(e.exp() > 0.0) || !e.exp().is_finite())
            .count();
        if bad > 0 {
            warnings.push(FitWarning::NonPositiveFittedMean { count: bad });
        }
    }
    if !sol.converged {
        warnings.push(FitWarning::NotConverged {
            estimating_norm: sol.norm,
        });
    }
    Ok(RegressionFit::assemble(
        link,
        design.names.clone(),
        &sol.beta,
        &covariance,
        sol.iterations,
        sol.converged,
        sol.norm,
        warnings,
    ))
}

/// Sandwich covariance of the pseudo-value regression at `beta`.
pub fn sandwich_variance(
    pv: &PseudoValueSet,
    design: &Design,
    beta: &[f64],
    link: Link,
) -> Result<DMatrix<f64>> {
    let ones = vec![1.0; pv.values.len()];
    let eq = equation(pv, design, &ones, link);
    let beta = DVector::from_column_slice(beta);
    gee::sandwich(&eq.bread(&beta), &eq.contributions(&beta))
}

/// Estimating function `U(beta)` of the pseudo-value regression.
pub fn estimating_function(
    pv: &PseudoValueSet,
    design: &Design,
    beta: &[f64],
    link: Link,
) -> Vec<f64> {
    let ones = vec![1.0; pv.values.len()];
    let eq = equation(pv, design, &ones, link);
    eq.value(&DVector::from_column_slice(beta))
        .iter()
        .copied()
        .collect()
}
