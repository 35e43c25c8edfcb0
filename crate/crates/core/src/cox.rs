//! Cox proportional-hazards regression with Breslow ties.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{Result, RmstError};
use crate::linalg::{self, check_full_rank, sup_norm, to_rows};
use crate::sample::SurvivalSample;
use crate::stats::normal_two_sided_p;

const MAX_ITERATIONS: usize = 50;
const SCORE_TOLERANCE: f64 = 1e-9;
const LOGLIK_TOLERANCE: f64 = 1e-10;
/// |beta| * sd(z) beyond this is treated as a diverging (monotone likelihood) fit.
const DIVERGENCE_LIMIT: f64 = 20.0;
/// Standard error per standard deviation of z beyond this means a flat likelihood.
const FLAT_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inverse observed information.
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_partial_likelihood: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub score_norm: f64,
    pub diagnostic: Option<String>,
}

impl CoxFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.p_values[j])
    }
}

/// Risk-set sums prepared once per data set: subjects in decreasing time order,
/// grouped by tied times.
struct RiskSets<'a> {
    z: &'a DMatrix<f64>,
    order: Vec<usize>,
    /// `(start, end)` ranges into `order` of tied times, latest first.
    blocks: Vec<(usize, usize)>,
    events: Vec<bool>,
}

struct Derivatives {
    loglik: f64,
    score: DVector<f64>,
    information: DMatrix<f64>,
}

impl<'a> RiskSets<'a> {
    fn new(samples: &[SurvivalSample], z: &'a DMatrix<f64>) -> Self {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| samples[b].time.total_cmp(&samples[a].time));
        let mut blocks = Vec::new();
        let mut k = 0;
        while k < order.len() {
            let t = samples[order[k]].time;
            let mut j = k;
            while j < order.len() && samples[order[j]].time == t {
                j += 1;
            }
            blocks.push((k, j));
            k = j;
        }
        Self {
            z,
            order,
            blocks,
            events: samples.iter().map(|s| s.event).collect(),
        }
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Derivatives {
        let p = self.z.ncols();
        let eta = self.z * beta;
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let mut out = Derivatives {
            loglik: 0.0,
            score: DVector::zeros(p),
            information: DMatrix::zeros(p, p),
        };
        for &(start, end) in &self.blocks {
            let mut d = 0.0;
            let mut zsum = DVector::<f64>::zeros(p);
            let mut eta_sum = 0.0;
            for &i in &self.order[start..end] {
                let r = (eta[i] - shift).exp();
                let zi = self.z.row(i).transpose();
                s0 += r;
                s1 += &zi * r;
                s2 += &zi * zi.transpose() * r;
                if self.events[i] {
                    d += 1.0;
                    zsum += zi;
                    eta_sum += eta[i] - shift;
                }
            }
            if d > 0.0 {
                let mean = &s1 / s0;
                out.loglik += eta_sum - d * s0.ln();
                out.score += zsum - &mean * d;
                out.information += (&s2 / s0 - &mean * mean.transpose()) * d;
            }
        }
        out
    }
}

/// Newton-Raphson maximization of the Breslow partial likelihood. `design`
/// must not contain an intercept column.
pub fn fit_coxph(samples: &[SurvivalSample], design: &Design) -> Result<CoxFit> {
    crate::sample::validate(samples)?;
    if design.nrows() != samples.len() {
        return Err(RmstError::InvalidInput(format!(
            "design has {} rows for {} subjects",
            design.nrows(),
            samples.len()
        )));
    }
    if !samples.iter().any(|s| s.event) {
        return Err(RmstError::NoEvents("Cox model data".into()));
    }
    let p = design.ncols();
    let mut z = design.matrix.clone();
    let means: Vec<f64> = (0..p).map(|j| z.column(j).mean()).collect();
    for j in 0..p {
        z.column_mut(j).add_scalar_mut(-means[j]);
    }
    if p > 0 {
        check_full_rank(&z)?;
    }
    let scales: Vec<f64> = (0..p)
        .map(|j| (z.column(j).map(|v| v * v).mean()).sqrt())
        .collect();

    let risk = RiskSets::new(samples, &z);
    let mut beta = DVector::<f64>::zeros(p);
    let mut cur = risk.evaluate(&beta);
    let mut iterations = 0;
    let mut converged = p == 0 || sup_norm(&cur.score) < SCORE_TOLERANCE;
    let mut diagnostic = None;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let step = match linalg::solve(&cur.information, &cur.score, "Cox information") {
            Ok(s) => s,
            Err(e) => {
                diagnostic = Some(e.to_string());
                break;
            }
        };
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let cand = &beta + &step * t;
            let d = risk.evaluate(&cand);
            if d.loglik.is_finite() && d.loglik >= cur.loglik - 1e-12 * cur.loglik.abs() {
                next = Some((cand, d));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, d)) = next else {
            diagnostic = Some("step halving failed to increase the partial likelihood".into());
            break;
        };
        let rel = (d.loglik - cur.loglik).abs() / cur.loglik.abs().max(1e-300);
        beta = cand;
        cur = d;
        if sup_norm(&cur.score) < SCORE_TOLERANCE || rel < LOGLIK_TOLERANCE {
            converged = true;
        }
    }
    let covariance = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        linalg::spd_inverse(&cur.information, "Cox information")
            .unwrap_or_else(|_| DMatrix::from_element(p, p, f64::NAN))
    };
    let diverging = (0..p).find(|&j| {
        (beta[j] * scales[j]).abs() > DIVERGENCE_LIMIT
            || !(covariance[(j, j)].sqrt() * scales[j] < FLAT_LIMIT)
    });
    if let Some(j) = diverging {
        converged = false;
        diagnostic = Some(format!(
            "monotone likelihood: coefficient '{}' diverges",
            design.names[j]
        ));
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence after {iterations} iterations"));
    }

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..p).map(|j| covariance[(j, j)].sqrt()).collect();
    let wald_z: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| b / s)
        .collect();
    let p_values = wald_z
        .iter()
        .map(|&z| {
            if z.is_finite() {
                normal_two_sided_p(z)
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(CoxFit {
        names: design.names.clone(),
        coefficients,
        covariance: to_rows(&covariance),
        std_errors,
        wald_z,
        p_values,
        log_partial_likelihood: cur.loglik,
        n_iterations: iterations,
        converged,
        score_norm: sup_norm(&cur.score),
        diagnostic,
    })
}
