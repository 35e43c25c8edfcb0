use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};

/// Data-generating family: log-linear proportional hazards, or with a
/// treatment effect that switches at a covariate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    PH,
    CP,
}

/// How censoring times are drawn for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensoringMechanism {
    /// Each subject is censored with probability `p` (the arm's target), at a
    /// uniform time before `min(T, tau)`.
    #[default]
    RandomFraction,
    /// Independent `C ~ Exponential(lambda)` with `lambda` calibrated to the target.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub family: Family,
    pub tau: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta3: Option<f64>,
    pub x2_mean_treatment: f64,
    pub x2_mean_control: f64,
    #[serde(default = "default_x2_variance")]
    pub x2_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default = "default_change_point")]
    pub change_point: f64,
    pub censor_target_treatment: f64,
    pub censor_target_control: f64,
    #[serde(default = "one")]
    pub weibull_shape: f64,
    #[serde(default = "one")]
    pub weibull_scale: f64,
    #[serde(default = "default_allocation")]
    pub allocation: String,
    #[serde(default)]
    pub censoring: CensoringMechanism,
}

fn default_x2_variance() -> f64 {
    20.0
}

fn default_change_point() -> f64 {
    50.0
}

fn one() -> f64 {
    1.0
}

fn default_allocation() -> String {
    "1:1".into()
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RmstError::Config(format!("{}: {m}", self.name)));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        for (field, v) in [
            ("censor_target_treatment", self.censor_target_treatment),
            ("censor_target_control", self.censor_target_control),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{field} must lie in [0, 1), got {v}"));
            }
        }
        if !(self.x2_variance >= 0.0) {
            return bad("x2_variance must be non-negative".into());
        }
        if !(self.weibull_shape > 0.0 && self.weibull_scale > 0.0) {
            return bad("weibull_shape and weibull_scale must be positive".into());
        }
        if self.allocation != "1:1" {
            return bad(format!(
                "only 1:1 allocation is supported, got '{}'",
                self.allocation
            ));
        }
        if self.family == Family::CP
            && (self.beta3.is_none() || self.a.is_none() || self.b.is_none())
        {
            return bad("CP scenarios need beta3, a and b".into());
        }
        let coefficients = [
            self.beta0,
            self.beta1,
            self.beta2,
            self.beta3.unwrap_or(0.0),
        ];
        if coefficients.iter().any(|v| !v.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }

    /// Linear predictor of `log T` before the error term.
    pub fn linear_predictor(&self, treated: bool, x2: f64) -> f64 {
        let x1 = if treated { 1.0 } else { 0.0 };
        let mut lp = self.beta0 + self.beta1 * x1 + self.beta2 * x2;
        if self.family == Family::CP {
            let x3 = if x2 <= self.change_point {
                self.a.unwrap_or(0.0)
            } else {
                self.b.unwrap_or(0.0)
            };
            lp += self.beta3.unwrap_or(0.0) * x1 * x3;
        }
        lp
    }

    pub fn x2_mean(&self, treated: bool) -> f64 {
        if treated {
            self.x2_mean_treatment
        } else {
            self.x2_mean_control
        }
    }

    pub fn censor_target(&self, treated: bool) -> f64 {
        if treated {
            self.censor_target_treatment
        } else {
            self.censor_target_control
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| RmstError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RmstError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| RmstError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[allow(clippy::too_many_arguments)]
fn row(
    name: &str,
    family: Family,
    tau: f64,
    beta0: f64,
    beta1: f64,
    beta3: Option<f64>,
    means: (f64, f64),
    targets: (f64, f64),
) -> ScenarioConfig {
    let cp = family == Family::CP;
    ScenarioConfig {
        name: name.into(),
        family,
        tau,
        beta0,
        beta1,
        beta2: -0.1,
        beta3,
        x2_mean_treatment: means.0,
        x2_mean_control: means.1,
        x2_variance: 20.0,
        a: cp.then_some(1.0),
        b: cp.then_some(-0.5),
        change_point: 50.0,
        censor_target_treatment: targets.0,
        censor_target_control: targets.1,
        weibull_shape: 1.0,
        weibull_scale: 1.0,
        allocation: "1:1".into(),
        censoring: CensoringMechanism::RandomFraction,
    }
}

/// The sixteen built-in scenarios.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    use Family::{CP, PH};
    let (eq, shifted) = ((50.0, 50.0), (48.0, 52.0));
    let (low, high) = ((0.1, 0.1), (0.4, 0.1));
    vec![
        row("PH-S1", PH, 0.2, 2.0, 0.0, None, eq, low),
        row("PH-S2", PH, 0.2, 2.0, 0.0, None, eq, high),
        row("PH-S3", PH, 0.2, 2.0, 0.2, None, eq, low),
        row("PH-S4", PH, 0.2, 2.0, 0.2, None, eq, high),
        row("PH-S5", PH, 0.2, 2.0, 0.0, None, shifted, low),
        row("PH-S6", PH, 0.2, 2.0, 0.0, None, shifted, high),
        row("PH-S7", PH, 0.2, 2.0, 0.2, None, shifted, low),
        row("PH-S8", PH, 0.2, 2.0, 0.2, None, shifted, high),
        row("CP-S1", CP, 0.5, 2.0, -0.5, Some(2.0), eq, low),
        row("CP-S2", CP, 0.5, 2.0, -0.5, Some(2.0), eq, high),
        row("CP-S3", CP, 0.5, 2.0, -0.5, Some(2.0), shifted, low),
        row("CP-S4", CP, 0.5, 2.0, -0.5, Some(2.0), shifted, high),
        row("CP-S5", CP, 0.6, 4.0, -0.5, Some(3.0), eq, low),
        row("CP-S6", CP, 0.6, 4.0, -0.5, Some(3.0), eq, high),
        row("CP-S7", CP, 0.6, 4.0, -0.5, Some(3.0), shifted, low),
        row("CP-S8", CP, 0.6, 4.0, -0.5, Some(3.0), shifted, high),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios()
        .into_iter()
        .find(|c| c.name.eq_ignore_ascii_case(name))
}
