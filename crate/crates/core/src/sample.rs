use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};

/// Treatment arm of a two-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Treatment,
    Control,
}

impl Group {
    /// Indicator coding used in design matrices: treatment = 1.
    pub fn indicator(self) -> f64 {
        match self {
            Group::Treatment => 1.0,
            Group::Control => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Treatment => "treatment",
            Group::Control => "control",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = RmstError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "treatment" | "1" => Ok(Group::Treatment),
            "control" | "0" => Ok(Group::Control),
            other => Err(RmstError::InvalidInput(format!("unknown group '{other}'"))),
        }
    }
}

/// One subject: observed time `min(T, C)`, event flag `T <= C`, arm and baseline covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub id: String,
    pub time: f64,
    pub event: bool,
    pub group: Group,
    pub covariates: Vec<f64>,
}

impl SurvivalSample {
    pub fn new(id: impl Into<String>, time: f64, event: bool, group: Group) -> Self {
        Self {
            id: id.into(),
            time,
            event,
            group,
            covariates: Vec::new(),
        }
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = covariates;
        self
    }
}

/// Checks the dataset-level invariants shared by every estimator.
pub fn validate(samples: &[SurvivalSample]) -> Result<()> {
    let first = samples.first().ok_or(RmstError::Empty("no samples"))?;
    let width = first.covariates.len();
    for s in samples {
        if !s.time.is_finite() || s.time < 0.0 {
            return Err(RmstError::InvalidInput(format!(
                "subject {}: time must be finite and non-negative, got {}",
                s.id, s.time
            )));
        }
        if s.covariates.len() != width {
            return Err(RmstError::InvalidInput(format!(
                "subject {}: expected {} covariates, found {}",
                s.id,
                width,
                s.covariates.len()
            )));
        }
    }
    Ok(())
}

pub fn largest_time(samples: &[SurvivalSample]) -> f64 {
    samples
        .iter()
        .map(|s| s.time)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn split_by_group(samples: &[SurvivalSample]) -> (Vec<SurvivalSample>, Vec<SurvivalSample>) {
    samples
        .iter()
        .cloned()
        .partition(|s| s.group == Group::Treatment)
}
