use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::calibrate::calibrate;
use super::generate::{generate_dataset, CensoringParams};
use super::rng::replicate_rng;
use super::scenario::ScenarioConfig;
use crate::cox::fit_coxph;
use crate::design::{Design, GROUP};
use crate::error::{Result, RmstError};
use crate::fit::Link;
use crate::ipcw::{fit_ipcw_with, IpcwOptions};
use crate::pseudo::{fit_pseudo_gee, pseudo_values_with, PseudoOptions};
use crate::report::Method;
use crate::rmst::rmst_diff_test_alpha;
use crate::sample::SurvivalSample;
use crate::stats::Reference;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudy {
    pub scenarios: Vec<ScenarioConfig>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub n: usize,
    pub method: Method,
    pub reps: usize,
    pub rejections: usize,
    pub rate: f64,
    pub mc_se: f64,
    /// Replicates where the method errored or did not converge.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn get(&self, scenario: &str, n: usize, method: Method) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.n == n && r.method == method)
    }

    /// Writes `scenario,n,method,reps,rejections,rate,mc_se,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| RmstError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("power table serializes")
    }
}

/// Two-sided p-value for the group effect of each method, in [`Method::ALL`]
/// order; `None` when the method failed on this data set.
pub fn method_p_values(samples: &[SurvivalSample], tau: f64) -> [Option<f64>; 4] {
    let finite = |p: f64| p.is_finite().then_some(p);
    let naive = rmst_diff_test_alpha(samples, tau, Reference::Normal, 0.05)
        .ok()
        .and_then(|r| finite(r.p_value));
    let design = Design::intercept_group_covariates(samples, &["x2".to_string()]);
    let Ok(design) = design else {
        return [naive, None, None, None];
    };
    let serial = PseudoOptions {
        parallel: false,
        ..PseudoOptions::default()
    };
    let andersen = pseudo_values_with(samples, tau, serial)
        .and_then(|pv| fit_pseudo_gee(&pv, &design, Link::Identity))
        .ok()
        .filter(|f| f.converged)
        .and_then(|f| f.p_value(GROUP).and_then(finite));
    let tian = fit_ipcw_with(
        samples,
        &design,
        tau,
        Link::Identity,
        IpcwOptions::default(),
    )
    .ok()
    .filter(|f| f.converged)
    .and_then(|f| f.p_value(GROUP).and_then(finite));
    let cox = fit_coxph(samples, &design.without_intercept())
        .ok()
        .filter(|f| f.converged)
        .and_then(|f| f.p_value(GROUP).and_then(finite));
    [naive, andersen, tian, cox]
}

/// Regenerates replicate `replicate` of `cfg` at size `n` and returns its p-values.
pub fn replicate_p_values(
    cfg: &ScenarioConfig,
    params: &CensoringParams,
    n: usize,
    seed: u64,
    replicate: u64,
) -> Result<[Option<f64>; 4]> {
    let mut rng = replicate_rng(seed, &cfg.name, n, replicate);
    let data = generate_dataset(cfg, n, params, &mut rng)?;
    Ok(method_p_values(&data, cfg.tau))
}

pub fn run_power_study(study: &PowerStudy) -> Result<PowerTable> {
    run_power_study_with_progress(study, &|_| {})
}

/// As [`run_power_study`], reporting each finished `(scenario, n)` cell.
pub fn run_power_study_with_progress(
    study: &PowerStudy,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<PowerTable> {
    if study.reps == 0 {
        return Err(RmstError::InvalidInput("reps must be at least 1".into()));
    }
    if !(study.alpha > 0.0 && study.alpha < 1.0) {
        return Err(RmstError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {}",
            study.alpha
        )));
    }
    for cfg in &study.scenarios {
        cfg.validate()?;
    }
    for &n in &study.n_grid {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(RmstError::InvalidInput(format!(
                "n must be even and at least 2, got {n}"
            )));
        }
    }
    let run = || -> Result<PowerTable> {
        let mut rows = Vec::new();
        for cfg in &study.scenarios {
            let params = calibrate(cfg)?;
            for &n in &study.n_grid {
                let outcomes: Vec<[Option<f64>; 4]> = (0..study.reps as u64)
                    .into_par_iter()
                    .map(|r| replicate_p_values(cfg, &params, n, study.seed, r))
                    .collect::<Result<_>>()?;
                for (k, method) in Method::ALL.into_iter().enumerate() {
                    let rejections = outcomes
                        .iter()
                        .filter(|o| o[k].is_some_and(|p| p < study.alpha))
                        .count();
                    let failures = outcomes.iter().filter(|o| o[k].is_none()).count();
                    let rate = rejections as f64 / study.reps as f64;
                    rows.push(PowerRow {
                        scenario: cfg.name.clone(),
                        n,
                        method,
                        reps: study.reps,
                        rejections,
                        rate,
                        mc_se: (rate * (1.0 - rate) / study.reps as f64).sqrt(),
                        failures,
                    });
                }
                progress(&format!("{} n={n} done", cfg.name));
            }
        }
        Ok(PowerTable { rows })
    };
    match study.threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| RmstError::InvalidInput(e.to_string()))?
            .install(run),
    }
}
