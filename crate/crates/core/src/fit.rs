use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::to_rows;
use crate::stats::{normal_quantile, normal_two_sided_p};

/// Link between the linear predictor and the restricted mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Log,
}

impl Link {
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
        }
    }

    /// `d g^{-1}(eta) / d eta`.
    pub fn inverse_derivative(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => eta.exp(),
        }
    }
}

impl std::str::FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Link::Identity),
            "log" => Ok(Link::Log),
            other => Err(format!("unknown link '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWarning {
    /// Log link fitted to a response containing non-positive values.
    NonPositiveResponse { count: usize },
    /// A fitted mean was non-positive or non-finite at the reported solution.
    NonPositiveFittedMean { count: usize },
    /// The iteration limit was reached before the estimating function vanished.
    NotConverged { estimating_norm: f64 },
}

/// Coefficients, covariance and per-coefficient Wald summaries of a fitted mean model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub link: Link,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Sup-norm of the estimating function at the reported coefficients.
    pub estimating_norm: f64,
    pub warnings: Vec<FitWarning>,
}

impl RegressionFit {
    pub(crate) fn assemble(
        link: Link,
        names: Vec<String>,
        beta: &DVector<f64>,
        covariance: &DMatrix<f64>,
        n_iterations: usize,
        converged: bool,
        estimating_norm: f64,
        warnings: Vec<FitWarning>,
    ) -> Self {
        let q = normal_quantile(0.975);
        let coefficients: Vec<f64> = beta.iter().copied().collect();
        let std_errors: Vec<f64> = (0..beta.len())
            .map(|j| covariance[(j, j)].max(0.0).sqrt())
            .collect();
        let wald_z: Vec<f64> = coefficients
            .iter()
            .zip(&std_errors)
            .map(|(b, s)| b / s)
            .collect();
        let p_values = wald_z.iter().map(|&z| normal_two_sided_p(z)).collect();
        let ci_low = coefficients
            .iter()
            .zip(&std_errors)
            .map(|(b, s)| b - q * s)
            .collect();
        let ci_high = coefficients
            .iter()
            .zip(&std_errors)
            .map(|(b, s)| b + q * s)
            .collect();
        Self {
            link,
            names,
            coefficients,
            covariance: to_rows(covariance),
            std_errors,
            wald_z,
            p_values,
            ci_low,
            ci_high,
            n_iterations,
            converged,
            estimating_norm,
            warnings,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.coefficients[j])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.std_errors[j])
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.p_values[j])
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.covariance.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }
}
