use nalgebra::DMatrix;

use crate::error::{Result, RmstError};
use crate::sample::SurvivalSample;

pub const INTERCEPT: &str = "intercept";
pub const GROUP: &str = "group";

/// A named design matrix, one row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if names.len() != matrix.ncols() {
            return Err(RmstError::InvalidInput(format!(
                "{} column names for a design with {} columns",
                names.len(),
                matrix.ncols()
            )));
        }
        Ok(Self { names, matrix })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(RmstError::InvalidInput(format!(
                "design row {bad} has {} entries, expected {p}",
                rows[bad].len()
            )));
        }
        let matrix = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(names, matrix)
    }

    /// `[1, group, covariates...]`, the shared design of the adjusted analyses.
    pub fn intercept_group_covariates(
        samples: &[SurvivalSample],
        covariate_names: &[String],
    ) -> Result<Self> {
        let mut names = vec![INTERCEPT.to_string(), GROUP.to_string()];
        names.extend(covariate_names.iter().cloned());
        let rows: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| {
                let mut r = vec![1.0, s.group.indicator()];
                r.extend_from_slice(&s.covariates);
                r
            })
            .collect();
        Self::from_rows(names, &rows)
    }

    /// `[1, group]`.
    pub fn intercept_group(samples: &[SurvivalSample]) -> Self {
        let matrix = DMatrix::from_fn(samples.len(), 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                samples[i].group.indicator()
            }
        });
        Self {
            names: vec![INTERCEPT.to_string(), GROUP.to_string()],
            matrix,
        }
    }

    /// Drops the intercept column if present (Cox models absorb it into the baseline hazard).
    pub fn without_intercept(&self) -> Self {
        match self.names.iter().position(|n| n == INTERCEPT) {
            None => self.clone(),
            Some(k) => Self {
                names: self
                    .names
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, n)| n.clone())
                    .collect(),
                matrix: self.matrix.clone().remove_column(k),
            },
        }
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}
