//! Runs the naive, pseudo-value, IPCW and Cox analyses on one data set and
//! renders the results.

use serde::{Deserialize, Serialize};

use crate::cox::{fit_coxph, CoxFit};
use crate::dataset::{summarize, Dataset, DatasetSummary};
use crate::design::Design;
use crate::error::Result;
use crate::fit::{Link, RegressionFit};
use crate::ipcw::{fit_ipcw_with, IpcwOptions};
use crate::pseudo::{fit_pseudo_gee, pseudo_values_with, PseudoOptions};
use crate::rmst::{rmst_diff_test_alpha, DiffTestResult};
use crate::stats::Reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Andersen,
    Tian,
    Cox,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::Andersen, Method::Tian, Method::Cox];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Andersen => "andersen",
            Method::Tian => "tian",
            Method::Cox => "cox",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tau: f64,
    pub link: Link,
    pub reference: Reference,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub pseudo: PseudoOptions,
    pub ipcw: IpcwOptions,
}

impl AnalysisOptions {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            link: Link::Identity,
            reference: Reference::Normal,
            alpha: 0.05,
            methods: vec![Method::Naive, Method::Andersen, Method::Tian],
            pseudo: PseudoOptions::default(),
            ipcw: IpcwOptions::default(),
        }
    }
}

/// Result of one method, or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<T> {
    pub result: Option<T>,
    pub error: Option<String>,
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Self {
                result: Some(v),
                error: None,
            },
            Err(e) => Self {
                result: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.result.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tau: f64,
    pub link: Link,
    pub design: Vec<String>,
    pub summary: DatasetSummary,
    pub naive: Option<Outcome<DiffTestResult>>,
    pub andersen: Option<Outcome<RegressionFit>>,
    pub tian: Option<Outcome<RegressionFit>>,
    pub cox: Option<Outcome<CoxFit>>,
}

impl AnalysisReport {
    /// True when every requested method failed.
    pub fn total_failure(&self) -> bool {
        let oks = [
            self.naive.as_ref().map(Outcome::is_ok),
            self.andersen.as_ref().map(Outcome::is_ok),
            self.tian.as_ref().map(Outcome::is_ok),
            self.cox.as_ref().map(Outcome::is_ok),
        ];
        oks.iter().flatten().all(|ok| !ok)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table in the "estimate ± SE [CI] (p)" layout.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "n = {}, events = {}, tau = {}\n",
            self.summary.n,
            self.summary.events,
            sig4(self.tau)
        ));
        for arm in &self.summary.arms {
            out.push_str(&format!(
                "  {:<9} n = {:<4} censored {}\n",
                arm.group.as_str(),
                arm.n,
                arm.censoring_label()
            ));
        }
        if let Some(naive) = &self.naive {
            out.push_str("\nnaive RMST\n");
            match (&naive.result, &naive.error) {
                (Some(r), _) => {
                    out.push_str(&format!(
                        "  treatment  {} ± {}\n",
                        sig4(r.treatment.estimate),
                        sig4(r.treatment.std_error())
                    ));
                    out.push_str(&format!(
                        "  control    {} ± {}\n",
                        sig4(r.control.estimate),
                        sig4(r.control.std_error())
                    ));
                    out.push_str(&format!(
                        "  difference {}\n",
                        estimate_line(r.diff, r.se, r.ci_low, r.ci_high, r.p_value)
                    ));
                }
                (None, Some(e)) => out.push_str(&format!("  error: {e}\n")),
                (None, None) => {}
            }
        }
        for (title, fit) in [("andersen", &self.andersen), ("tian", &self.tian)] {
            let Some(fit) = fit else { continue };
            out.push_str(&format!("\n{title} ({:?} link)\n", self.link).to_lowercase());
            match (&fit.result, &fit.error) {
                (Some(f), _) => {
                    let w = f.names.iter().map(String::len).max().unwrap_or(0);
                    for j in 0..f.names.len() {
                        out.push_str(&format!(
                            "  {:<w$} {}\n",
                            f.names[j],
                            estimate_line(
                                f.coefficients[j],
                                f.std_errors[j],
                                f.ci_low[j],
                                f.ci_high[j],
                                f.p_values[j]
                            )
                        ));
                    }
                    if !f.converged {
                        out.push_str("  warning: not converged\n");
                    }
                }
                (None, Some(e)) => out.push_str(&format!("  error: {e}\n")),
                (None, None) => {}
            }
        }
        if let Some(cox) = &self.cox {
            out.push_str("\ncox (log hazard ratio)\n");
            match (&cox.result, &cox.error) {
                (Some(f), _) => {
                    let w = f.names.iter().map(String::len).max().unwrap_or(0);
                    for j in 0..f.names.len() {
                        out.push_str(&format!(
                            "  {:<w$} {} ± {} ({})\n",
                            f.names[j],
                            sig4(f.coefficients[j]),
                            sig4(f.std_errors[j]),
                            sig4(f.p_values[j])
                        ));
                    }
                }
                (None, Some(e)) => out.push_str(&format!("  error: {e}\n")),
                (None, None) => {}
            }
        }
        out
    }
}

fn estimate_line(est: f64, se: f64, lo: f64, hi: f64, p: f64) -> String {
    format!(
        "{} ± {} [{}, {}] ({})",
        sig4(est),
        sig4(se),
        sig4(lo),
        sig4(hi),
        sig4(p)
    )
}

/// Formats `x` with four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    let scale = 10f64.powi(3 - magnitude);
    let rounded = (x * scale).round() / scale;
    format!("{rounded:.decimals$}")
}

/// Runs the requested methods on `[intercept, group, covariates...]`.
pub fn analyze(dataset: &Dataset, options: &AnalysisOptions) -> Result<AnalysisReport> {
    let samples = &dataset.samples;
    crate::sample::validate(samples)?;
    let design = Design::intercept_group_covariates(samples, &dataset.covariate_names)?;
    let wants = |m: Method| options.methods.contains(&m);

    let naive = wants(Method::Naive).then(|| {
        Outcome::from_result(rmst_diff_test_alpha(
            samples,
            options.tau,
            options.reference,
            options.alpha,
        ))
    });
    let andersen = wants(Method::Andersen).then(|| {
        Outcome::from_result(
            pseudo_values_with(samples, options.tau, options.pseudo)
                .and_then(|pv| fit_pseudo_gee(&pv, &design, options.link)),
        )
    });
    let tian = wants(Method::Tian).then(|| {
        Outcome::from_result(fit_ipcw_with(
            samples,
            &design,
            options.tau,
            options.link,
            options.ipcw,
        ))
    });
    let cox = wants(Method::Cox)
        .then(|| Outcome::from_result(fit_coxph(samples, &design.without_intercept())));

    Ok(AnalysisReport {
        tau: options.tau,
        link: options.link,
        design: design.names.clone(),
        summary: summarize(samples),
        naive,
        andersen,
        tian,
        cox,
    })
}
