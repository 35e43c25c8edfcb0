//! Estimating equations of the form `sum_i w_i {y_i - g^{-1}(b'z_i)} h_i z_i = 0`
//! shared by the pseudo-value and IPCW regressions, plus the sandwich covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::fit::Link;
use crate::linalg::{self, sup_norm, weighted_gram};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

/// Per-subject factor `h_i` multiplying the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Multiplier {
    /// `h_i = d g^{-1}(eta_i) / d eta` (generalized estimating equations).
    MeanDerivative,
    /// `h_i = 1` (the IPCW estimating function).
    Unit,
}

pub(crate) struct EstimatingEquation<'a> {
    pub z: &'a DMatrix<f64>,
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub link: Link,
    pub multiplier: Multiplier,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub beta: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub norm: f64,
}

impl EstimatingEquation<'_> {
    fn eta(&self, beta: &DVector<f64>) -> DVector<f64> {
        self.z * beta
    }

    fn h(&self, eta: f64) -> f64 {
        match self.multiplier {
            Multiplier::MeanDerivative => self.link.inverse_derivative(eta),
            Multiplier::Unit => 1.0,
        }
    }

    /// Rows are the per-subject contributions `U_i(beta)`.
    pub fn contributions(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let eta = self.eta(beta);
        let mut u = self.z.clone();
        for i in 0..self.z.nrows() {
            let r = self.w[i] * (self.y[i] - self.link.inverse(eta[i])) * self.h(eta[i]);
            u.row_mut(i).scale_mut(r);
        }
        u
    }

    pub fn value(&self, beta: &DVector<f64>) -> DVector<f64> {
        let eta = self.eta(beta);
        let mut total = DVector::zeros(self.z.ncols());
        for i in 0..self.z.nrows() {
            let r = self.w[i] * (self.y[i] - self.link.inverse(eta[i])) * self.h(eta[i]);
            if r != 0.0 {
                total += self.z.row(i).transpose() * r;
            }
        }
        total
    }

    /// `sum_i w_i h_i (d g^{-1}/d eta) z_i z_i^T`: the information matrix of the
    /// GEE form and the negative Jacobian of the IPCW form.
    pub fn bread(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let eta = self.eta(beta);
        let v: Vec<f64> = (0..self.z.nrows())
            .map(|i| self.w[i] * self.h(eta[i]) * self.link.inverse_derivative(eta[i]))
            .collect();
        weighted_gram(self.z, &v)
    }

    /// Magnitude of the summands, used to make the stopping rule scale-free.
    fn scale(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.eta(beta);
        let s: f64 = (0..self.z.nrows())
            .map(|i| {
                let zmax = self.z.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
                (self.w[i] * self.y[i] * self.h(eta[i])).abs() * zmax
            })
            .sum();
        s.max(1.0)
    }

    /// Weighted least squares; exact for the identity link.
    pub fn weighted_least_squares(&self, y: &[f64]) -> Result<DVector<f64>> {
        let gram = weighted_gram(self.z, self.w);
        let mut rhs = DVector::zeros(self.z.ncols());
        for i in 0..self.z.nrows() {
            if self.w[i] != 0.0 {
                rhs += self.z.row(i).transpose() * (self.w[i] * y[i]);
            }
        }
        linalg::solve(&gram, &rhs, "weighted least squares")
    }

    pub fn solve(&self) -> Result<Solution> {
        match self.link {
            Link::Identity => {
                let beta = self.weighted_least_squares(self.y)?;
                let norm = sup_norm(&self.value(&beta));
                Ok(Solution {
                    beta,
                    iterations: 0,
                    converged: true,
                    norm,
                })
            }
            Link::Log => self.damped_newton(),
        }
    }

    fn log_start(&self) -> Result<DVector<f64>> {
        let positive: Vec<f64> = self
            .y
            .iter()
            .zip(self.w)
            .filter(|&(&y, &w)| w != 0.0 && y > 0.0)
            .map(|(&y, _)| y)
            .collect();
        let floor = if positive.is_empty() {
            1e-8
        } else {
            1e-3 * positive.iter().sum::<f64>() / positive.len() as f64
        };
        let logs: Vec<f64> = self.y.iter().map(|&y| y.max(floor).ln()).collect();
        self.weighted_least_squares(&logs)
    }

    fn damped_newton(&self) -> Result<Solution> {
        let mut beta = self.log_start()?;
        let mut u = self.value(&beta);
        let mut norm = sup_norm(&u);
        let tol = TOLERANCE * self.scale(&beta);
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            if norm < TOLERANCE || norm < tol {
                return Ok(Solution {
                    beta,
                    iterations,
                    converged: true,
                    norm,
                });
            }
            iterations += 1;
            let step = match linalg::solve(&self.bread(&beta), &u, "log-link information") {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let cand = &beta + &step * t;
                let cu = self.value(&cand);
                let cn = sup_norm(&cu);
                if cn.is_finite() && cn < norm {
                    beta = cand;
                    u = cu;
                    norm = cn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let converged = norm < TOLERANCE || norm < tol;
        Ok(Solution {
            beta,
            iterations,
            converged,
            norm,
        })
    }
}

/// Sandwich covariance `I^{-1} (sum_i U_i U_i^T) I^{-1}`.
///
/// Any common scale factor `c` applied as `I / c` and `meat / c^2` cancels, so
/// the residual-variance factors of the textbook form are omitted.
pub fn sandwich(bread: &DMatrix<f64>, contributions: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = linalg::spd_inverse(bread, "sandwich bread")?;
    let meat = linalg::outer_sum(contributions);
    let v = &inv * meat * &inv;
    Ok((&v + v.transpose()) * 0.5)
}
