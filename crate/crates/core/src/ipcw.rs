//! Inverse-probability-of-censoring-weighted regression of `min(T, tau)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Result, RmstError};
use crate::fit::{FitWarning, Link, RegressionFit};
use crate::gee::{self, EstimatingEquation, Multiplier};
use crate::km::{product_limit, StepFunction};
use crate::linalg::check_full_rank;
use crate::sample::{Group, SurvivalSample};

/// Which subjects contribute to the weighted estimating equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// An event at or before `tau`, or follow-up reaching `tau`.
    #[default]
    CompleteAtTau,
    /// Observed events only, wherever they fall.
    EventOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringModel {
    #[default]
    Pooled,
    PerArm,
}

/// Where the censoring survival function is read for a subject with `X_i = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    /// `G(x)`, counting censorings at `x` itself.
    #[default]
    RightContinuous,
    /// `G(x-)`.
    LeftLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IpcwVariance {
    /// Sandwich with the weights treated as known.
    #[default]
    FixedWeights,
    /// Adds the influence of estimating the censoring distribution.
    CensoringAdjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IpcwOptions {
    pub selection: Selection,
    pub censoring: CensoringModel,
    pub evaluation: Evaluation,
    pub variance: IpcwVariance,
}

impl std::str::FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "complete-at-tau" => Ok(Selection::CompleteAtTau),
            "event-only" => Ok(Selection::EventOnly),
            o => Err(format!("unknown selection '{o}'")),
        }
    }
}

impl std::str::FromStr for CensoringModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pooled" => Ok(CensoringModel::Pooled),
            "per-arm" => Ok(CensoringModel::PerArm),
            o => Err(format!("unknown censoring model '{o}'")),
        }
    }
}

impl std::str::FromStr for Evaluation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "right-continuous" => Ok(Evaluation::RightContinuous),
            "left-limit" => Ok(Evaluation::LeftLimit),
            o => Err(format!("unknown evaluation '{o}'")),
        }
    }
}

impl std::str::FromStr for IpcwVariance {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed-weights" => Ok(IpcwVariance::FixedWeights),
            "censoring-adjusted" => Ok(IpcwVariance::CensoringAdjusted),
            o => Err(format!("unknown variance '{o}'")),
        }
    }
}

/// Censoring survival estimate for one stratum (`group = None` when pooled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringFit {
    pub group: Option<Group>,
    pub g_hat: StepFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpcwWeights {
    /// `I(selected) / G(X_i)`; zero for unselected subjects.
    pub weights: Vec<f64>,
    pub selected: Vec<bool>,
    /// `X_i = min(time_i, tau)`.
    pub x: Vec<f64>,
    pub tau: f64,
    pub options: IpcwOptions,
    pub censoring: Vec<CensoringFit>,
}

impl IpcwWeights {
    pub fn n_selected(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    fn fit_for(&self, group: Group) -> &StepFunction {
        self.censoring
            .iter()
            .find(|c| c.group.is_none() || c.group == Some(group))
            .map(|c| &c.g_hat)
            .expect("censoring fit for every arm")
    }

    /// Writes `id,x,selected,weight`.
    pub fn write_csv<W: Write>(&self, samples: &[SurvivalSample], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| RmstError::Io(e.to_string());
        w.write_record(["id", "x", "selected", "weight"])
            .map_err(io)?;
        for (i, s) in samples.iter().enumerate() {
            w.write_record([
                s.id.clone(),
                self.x[i].to_string(),
                u8::from(self.selected[i]).to_string(),
                self.weights[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Censoring "events" for the weights: censored strictly before `tau`, on `min(time, tau)`.
fn truncated_censoring(samples: &[&SurvivalSample], tau: f64) -> StepFunction {
    let times: Vec<f64> = samples.iter().map(|s| s.time.min(tau)).collect();
    let flags: Vec<bool> = samples.iter().map(|s| !s.event && s.time < tau).collect();
    product_limit(&times, &flags)
}

pub fn ipcw_weights(samples: &[SurvivalSample], tau: f64) -> Result<IpcwWeights> {
    ipcw_weights_with(samples, tau, IpcwOptions::default())
}

pub fn ipcw_weights_with(
    samples: &[SurvivalSample],
    tau: f64,
    options: IpcwOptions,
) -> Result<IpcwWeights> {
    crate::sample::validate(samples)?;
    crate::rmst::check_tau(tau, crate::sample::largest_time(samples))?;
    let censoring = match options.censoring {
        CensoringModel::Pooled => {
            let all: Vec<&SurvivalSample> = samples.iter().collect();
            vec![CensoringFit {
                group: None,
                g_hat: truncated_censoring(&all, tau),
            }]
        }
        CensoringModel::PerArm => [Group::Treatment, Group::Control]
            .into_iter()
            .filter_map(|g| {
                let arm: Vec<&SurvivalSample> = samples.iter().filter(|s| s.group == g).collect();
                (!arm.is_empty()).then(|| CensoringFit {
                    group: Some(g),
                    g_hat: truncated_censoring(&arm, tau),
                })
            })
            .collect(),
    };
    let mut out = IpcwWeights {
        weights: vec![0.0; samples.len()],
        selected: vec![false; samples.len()],
        x: samples.iter().map(|s| s.time.min(tau)).collect(),
        tau,
        options,
        censoring,
    };
    for (i, s) in samples.iter().enumerate() {
        let selected = match options.selection {
            Selection::CompleteAtTau => (s.event && s.time <= tau) || s.time >= tau,
            Selection::EventOnly => s.event,
        };
        if !selected {
            continue;
        }
        let g_hat = out.fit_for(s.group);
        let x = out.x[i];
        let g = match options.evaluation {
            Evaluation::RightContinuous => g_hat.eval(x),
            Evaluation::LeftLimit => g_hat.left_limit(x),
        };
        if g <= 0.0 {
            return Err(RmstError::CensoringSupportExhausted {
                subject: s.id.clone(),
                x,
            });
        }
        out.selected[i] = true;
        out.weights[i] = 1.0 / g;
    }
    Ok(out)
}

fn equation<'a>(
    weights: &'a IpcwWeights,
    design: &'a Design,
    link: Link,
) -> EstimatingEquation<'a> {
    EstimatingEquation {
        z: &design.matrix,
        y: &weights.x,
        w: &weights.weights,
        link,
        multiplier: Multiplier::Unit,
    }
}

pub fn fit_ipcw(
    samples: &[SurvivalSample],
    design: &Design,
    tau: f64,
    link: Link,
) -> Result<RegressionFit> {
    fit_ipcw_with(samples, design, tau, link, IpcwOptions::default())
}

pub fn fit_ipcw_with(
    samples: &[SurvivalSample],
    design: &Design,
    tau: f64,
    link: Link,
    options: IpcwOptions,
) -> Result<RegressionFit> {
    let weights = ipcw_weights_with(samples, tau, options)?;
    fit_ipcw_weighted(samples, design, &weights, link)
}

/// Fits the weighted estimating equation for precomputed weights.
pub fn fit_ipcw_weighted(
    samples: &[SurvivalSample],
    design: &Design,
    weights: &IpcwWeights,
    link: Link,
) -> Result<RegressionFit> {
    if design.nrows() != samples.len() || weights.weights.len() != samples.len() {
        return Err(RmstError::InvalidInput(format!(
            "design has {} rows for {} subjects",
            design.nrows(),
            samples.len()
        )));
    }
    let p = design.ncols();
    let rows: Vec<usize> = (0..samples.len())
        .filter(|&i| weights.selected[i])
        .collect();
    if rows.len() < p {
        return Err(RmstError::InvalidInput(format!(
            "{} selected subjects for {} design columns",
            rows.len(),
            p
        )));
    }
    check_full_rank(&design.matrix.select_rows(&rows))?;

    let eq = equation(weights, design, link);
    let sol = eq.solve()?;
    let covariance = variance_at(samples, &eq, weights, &sol.beta)?;
    let mut warnings = Vec::new();
    if link == Link::Log {
        let fitted = &design.matrix * &sol.beta;
        let bad = rows
            .iter()
            .filter(|&&i| !fitted[i].exp().is_finite())
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

/// Sandwich covariance of the IPCW estimator at `beta`, per `weights.options.variance`.
pub fn ipcw_variance(
    samples: &[SurvivalSample],
    design: &Design,
    weights: &IpcwWeights,
    beta: &[f64],
    link: Link,
) -> Result<DMatrix<f64>> {
    let eq = equation(weights, design, link);
    variance_at(samples, &eq, weights, &DVector::from_column_slice(beta))
}

/// Estimating function `U(beta)` of the IPCW regression.
pub fn estimating_function(
    weights: &IpcwWeights,
    design: &Design,
    beta: &[f64],
    link: Link,
) -> Vec<f64> {
    let eq = equation(weights, design, link);
    eq.value(&DVector::from_column_slice(beta))
        .iter()
        .copied()
        .collect()
}

fn variance_at(
    samples: &[SurvivalSample],
    eq: &EstimatingEquation<'_>,
    weights: &IpcwWeights,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let mut u = eq.contributions(beta);
    if weights.options.variance == IpcwVariance::CensoringAdjusted {
        u += censoring_correction(samples, weights, &u);
    }
    gee::sandwich(&eq.bread(beta), &u)
}

/// Martingale term `sum_u q(u) / Y(u) dM_i^C(u)` for each subject, where
/// `q(u)` sums the weighted contributions of selected subjects whose weight
/// depends on the censoring jump at `u`.
fn censoring_correction(
    samples: &[SurvivalSample],
    weights: &IpcwWeights,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n, p) = u.shape();
    let mut out = DMatrix::zeros(n, p);
    let strata: Vec<Option<Group>> = weights.censoring.iter().map(|c| c.group).collect();
    for (stratum, fit) in strata.iter().zip(&weights.censoring) {
        let members: Vec<usize> = (0..n)
            .filter(|&i| stratum.is_none() || Some(samples[i].group) == *stratum)
            .collect();
        for (k, &t) in fit.g_hat.jump_times.iter().enumerate() {
            let y = fit.g_hat.at_risk[k] as f64;
            let d = fit.g_hat.n_events[k] as f64;
            let mut q = DVector::<f64>::zeros(p);
            for &j in &members {
                let depends = match weights.options.evaluation {
                    Evaluation::RightContinuous => weights.x[j] >= t,
                    Evaluation::LeftLimit => weights.x[j] > t,
                };
                if weights.selected[j] && depends {
                    q += u.row(j).transpose();
                }
            }
            q /= y;
            for &i in &members {
                let s = &samples[i];
                let jump = if !s.event && s.time < weights.tau && s.time == t {
                    1.0
                } else {
                    0.0
                };
                let at_risk = if s.time.min(weights.tau) >= t {
                    1.0
                } else {
                    0.0
                };
                let dm = jump - at_risk * d / y;
                if dm != 0.0 {
                    let mut row = out.row_mut(i);
                    row += q.transpose() * dm;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table3() -> Vec<SurvivalSample> {
        let t = [
            20.0, 40.0, 60.0, 80.0, 100.0, 100.0, 20.0, 30.0, 40.0, 50.0, 80.0, 100.0,
        ];
        let censored = [1, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1];
        (0..12)
            .map(|i| {
                let g = if i < 6 {
                    Group::Treatment
                } else {
                    Group::Control
                };
                SurvivalSample::new((i + 1).to_string(), t[i], censored[i] == 0, g)
            })
            .collect()
    }

    #[test]
    fn no_censoring_gives_unit_weights() {
        let s: Vec<_> = [1.0, 2.0, 3.0, 5.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| SurvivalSample::new(i.to_string(), t, true, Group::Control))
            .collect();
        let w = ipcw_weights(&s, 4.0).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0));
        assert_eq!(w.x, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn early_censoring_gets_zero_weight() {
        let w = ipcw_weights(&table3(), 100.0).unwrap();
        assert_eq!(w.weights[0], 0.0);
        assert!(!w.selected[0]);
        // censored at 100 = tau: complete for min(T, tau)
        assert!(w.selected[4] && w.weights[4] > 1.0);
    }

    #[test]
    fn table3_weights_by_hand() {
        let s = table3();
        let w = ipcw_weights(&s, 100.0).unwrap();
        // censorings strictly before 100: ID1 at 20 (Y=12), ID8 at 30 (Y=10),
        // ID3 at 60 (Y=6), ID11 at 80 (Y=5, shared with the event of ID4)
        let g20 = 11.0 / 12.0;
        let g30 = g20 * 9.0 / 10.0;
        let g60 = g30 * 5.0 / 6.0;
        let g80 = g60 * 4.0 / 5.0;
        let expect = [
            0.0,
            1.0 / g30,
            0.0,
            1.0 / g80,
            1.0 / g80,
            1.0 / g80,
            1.0 / g20,
            0.0,
            1.0 / g30,
            1.0 / g30,
            0.0,
            1.0 / g80,
        ];
        for (got, want) in w.weights.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn group_only_fit_is_difference_of_weighted_means() {
        let s = table3();
        let w = ipcw_weights(&s, 100.0).unwrap();
        let fit = fit_ipcw(&s, &Design::intercept_group(&s), 100.0, Link::Identity).unwrap();
        let mean = |g: Group| {
            let (num, den) = s
                .iter()
                .enumerate()
                .filter(|(_, x)| x.group == g)
                .fold((0.0, 0.0), |(a, b), (i, _)| {
                    (a + w.weights[i] * w.x[i], b + w.weights[i])
                });
            num / den
        };
        assert_relative_eq!(
            fit.coefficients[1],
            mean(Group::Treatment) - mean(Group::Control),
            epsilon = 1e-10
        );
        assert_relative_eq!(fit.coefficients[1], 25.0, epsilon = 0.05);
    }

    #[test]
    fn left_limit_ignores_censoring_at_x() {
        let s = table3();
        let opts = IpcwOptions {
            evaluation: Evaluation::LeftLimit,
            ..Default::default()
        };
        let w = ipcw_weights_with(&s, 100.0, opts).unwrap();
        // ID7 has its event at 20, where ID1 is censored
        assert_eq!(w.weights[6], 1.0);
    }

    #[test]
    fn per_arm_uses_own_arm() {
        let s = table3();
        let opts = IpcwOptions {
            censoring: CensoringModel::PerArm,
            ..Default::default()
        };
        let w = ipcw_weights_with(&s, 100.0, opts).unwrap();
        assert_eq!(w.censoring.len(), 2);
        // control arm censorings before 100: ID8 at 30 (Y=5), ID11 at 80 (Y=2)
        assert_relative_eq!(w.weights[6], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w.weights[11], 1.0 / (0.8 * 0.5), epsilon = 1e-12);
    }

    #[test]
    fn too_few_selected_subjects() {
        let s = vec![
            SurvivalSample::new("a", 1.0, true, Group::Treatment),
            SurvivalSample::new("b", 0.5, false, Group::Control),
            SurvivalSample::new("c", 0.7, false, Group::Control),
            SurvivalSample::new("d", 2.0, false, Group::Treatment),
        ];
        let d = Design::intercept_group(&s);
        assert!(fit_ipcw(&s, &d, 0.9, Link::Identity).is_err());
    }

    #[test]
    fn censoring_adjustment_changes_variance_only() {
        let s = table3();
        let d = Design::intercept_group(&s);
        let a = fit_ipcw(&s, &d, 100.0, Link::Identity).unwrap();
        let opts = IpcwOptions {
            variance: IpcwVariance::CensoringAdjusted,
            ..Default::default()
        };
        let b = fit_ipcw_with(&s, &d, 100.0, Link::Identity, opts).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert!(b.std_errors.iter().all(|v| v.is_finite() && *v > 0.0));
        assert_ne!(a.std_errors, b.std_errors);
    }

    #[test]
    fn log_link_saturated_model_matches_weighted_means() {
        let s = table3();
        let w = ipcw_weights(&s, 100.0).unwrap();
        let fit = fit_ipcw(&s, &Design::intercept_group(&s), 100.0, Link::Log).unwrap();
        assert!(fit.converged);
        let mean = |g: Group| {
            let (num, den) = s
                .iter()
                .enumerate()
                .filter(|(_, x)| x.group == g)
                .fold((0.0, 0.0), |(a, b), (i, _)| {
                    (a + w.weights[i] * w.x[i], b + w.weights[i])
                });
            num / den
        };
        assert_relative_eq!(
            fit.coefficients[0].exp(),
            mean(Group::Control),
            epsilon = 1e-8
        );
        assert_relative_eq!(
            (fit.coefficients[0] + fit.coefficients[1]).exp(),
            mean(Group::Treatment),
            epsilon = 1e-8
        );
    }

    #[test]
    fn weight_csv_has_header_and_rows() {
        let s = table3();
        let w = ipcw_weights(&s, 100.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,x,selected,weight\n"));
        assert_eq!(text.lines().count(), 13);
    }
}
