//! Restricted mean survival time and the unadjusted two-arm comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};
use crate::km::{km_fit, StepFunction};
use crate::sample::{Group, SurvivalSample};
use crate::stats::{self, Reference};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmstEstimate {
    pub estimate: f64,
    pub variance: f64,
    pub tau: f64,
    pub n: usize,
}

impl RmstEstimate {
    pub fn std_error(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub(crate) fn check_tau(tau: f64, max_time: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(RmstError::NonPositiveTau(tau));
    }
    if tau > max_time {
        return Err(RmstError::TauOutOfRange { tau, max_time });
    }
    Ok(())
}

/// Area under `surv` on `[0, tau]` with the Greenwood-weighted variance
/// `sum_{t_j <= tau} (int_{t_j}^tau S)^2 d_j / (Y_j (Y_j - d_j))`.
pub fn rmst(surv: &StepFunction, tau: f64, n: usize) -> Result<RmstEstimate> {
    // Past a final event the estimate is identically zero, so the area stays defined.
    let exhausted = surv.values.last() == Some(&0.0);
    if !(exhausted && tau.is_finite() && tau > 0.0) {
        check_tau(tau, surv.max_time)?;
    }

    let m = surv.jump_times.partition_point(|&t| t <= tau);
    // tail[j] = integral of S from jump j to tau
    let mut tail = vec![0.0; m];
    let mut acc = 0.0;
    for j in (0..m).rev() {
        let next = if j + 1 < m {
            surv.jump_times[j + 1]
        } else {
            tau
        };
        acc += surv.values[j] * (next - surv.jump_times[j]);
        tail[j] = acc;
    }
    let head = surv.jump_times.first().map_or(tau, |&t| t.min(tau));
    let estimate = if m == 0 { tau } else { head + acc };

    let variance = tail
        .iter()
        .zip(&surv.variance_terms)
        .map(|(a, g)| a * a * g)
        .sum::<f64>();

    Ok(RmstEstimate {
        estimate,
        variance,
        tau,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffTestResult {
    pub treatment: RmstEstimate,
    pub control: RmstEstimate,
    /// Treatment minus control.
    pub diff: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tau: f64,
    pub reference: Reference,
}

/// Unadjusted comparison of per-arm Kaplan-Meier RMSTs with a two-sided Wald test.
pub fn rmst_diff_test(
    samples: &[SurvivalSample],
    tau: f64,
    reference: Reference,
) -> Result<DiffTestResult> {
    rmst_diff_test_alpha(samples, tau, reference, 0.05)
}

pub fn rmst_diff_test_alpha(
    samples: &[SurvivalSample],
    tau: f64,
    reference: Reference,
    alpha: f64,
) -> Result<DiffTestResult> {
    let arm = |g: Group| -> Result<RmstEstimate> {
        let subset: Vec<SurvivalSample> =
            samples.iter().filter(|s| s.group == g).cloned().collect();
        if subset.is_empty() {
            return Err(RmstError::InvalidInput(format!("no subjects in {g} group")));
        }
        let km = km_fit(&subset)?;
        if km.no_events {
            return Err(RmstError::NoEvents(format!("{g} group")));
        }
        rmst(&km, tau, subset.len())
    };
    let treatment = arm(Group::Treatment)?;
    let control = arm(Group::Control)?;

    let diff = treatment.estimate - control.estimate;
    let se = (treatment.variance + control.variance).sqrt();
    // both arms degenerate and equal: no evidence of a difference
    let z = if diff == 0.0 && se == 0.0 {
        0.0
    } else {
        diff / se
    };
    let df = (treatment.n + control.n) as f64 - 2.0;
    let (p_value, q) = stats::two_sided(z, reference, df, alpha);
    Ok(DiffTestResult {
        treatment,
        control,
        diff,
        se,
        z,
        p_value,
        ci_low: diff - q * se,
        ci_high: diff + q * se,
        tau,
        reference,
    })
}
