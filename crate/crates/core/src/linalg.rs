use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RmstError};

/// `sum_i w_i z_i z_i^T` for the rows `z_i` of `z`.
pub(crate) fn weighted_gram(z: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let p = z.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for a in 0..p {
            let za = wi * z[(i, a)];
            for b in a..p {
                out[(a, b)] += za * z[(i, b)];
            }
        }
    }
    symmetrize_upper(&mut out);
    out
}

/// `sum_i u_i u_i^T` for the rows `u_i` of `u`.
pub(crate) fn outer_sum(u: &DMatrix<f64>) -> DMatrix<f64> {
    let ones = vec![1.0; u.nrows()];
    weighted_gram(u, &ones)
}

fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for a in 0..p {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
}

/// Numerical rank of `z` relative to its largest singular value.
pub(crate) fn rank(z: &DMatrix<f64>) -> usize {
    if z.nrows() == 0 || z.ncols() == 0 {
        return 0;
    }
    let sv = z.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let tol = max * 1e-10 * (z.nrows().max(z.ncols()) as f64);
    sv.iter().filter(|&&s| s > tol).count()
}

pub(crate) fn check_full_rank(z: &DMatrix<f64>) -> Result<()> {
    if rank(z) < z.ncols() {
        return Err(RmstError::RankDeficient {
            rows: z.nrows(),
            cols: z.ncols(),
        });
    }
    Ok(())
}

/// Inverse of a symmetric positive-definite matrix, falling back to LU.
pub(crate) fn spd_inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.inverse());
    }
    a.clone().try_inverse().ok_or(RmstError::Singular(context))
}

pub(crate) fn solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    context: &'static str,
) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone().lu().solve(b).ok_or(RmstError::Singular(context))
}

pub(crate) fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
