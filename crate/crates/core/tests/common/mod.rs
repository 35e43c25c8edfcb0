//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rmst_core::dataset::{load_dataset, Dataset, DatasetSchema};
use rmst_core::{Group, SurvivalSample};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn load(csv: &str, schema: &str) -> Dataset {
    let schema = DatasetSchema::from_path(fixture(schema)).expect("schema");
    load_dataset(fixture(csv), &schema).expect("dataset")
}

pub fn samples(times: &[f64], events: &[bool]) -> Vec<SurvivalSample> {
    times
        .iter()
        .zip(events)
        .enumerate()
        .map(|(i, (&t, &e))| {
            let g = if i % 2 == 0 {
                Group::Treatment
            } else {
                Group::Control
            };
            SurvivalSample::new(i.to_string(), t, e, g)
        })
        .collect()
}

/// Kaplan-Meier by explicit risk-set enumeration: `S(t)` at each distinct
/// event time, with `Y` counted as subjects whose time is `>= t`.
pub fn km_bruteforce(times: &[f64], events: &[bool]) -> Vec<(f64, f64)> {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut s = 1.0;
    event_times
        .into_iter()
        .map(|t| {
            let y = times.iter().filter(|&&u| u >= t).count() as f64;
            let d = times
                .iter()
                .zip(events)
                .filter(|(&u, &e)| e && u == t)
                .count() as f64;
            s *= 1.0 - d / y;
            (t, s)
        })
        .collect()
}

pub fn km_eval(curve: &[(f64, f64)], t: f64) -> f64 {
    curve
        .iter()
        .take_while(|(u, _)| *u <= t)
        .last()
        .map_or(1.0, |&(_, s)| s)
}

/// Area under the brute-force curve on `[0, tau]`, by summing rectangles.
pub fn rmst_bruteforce(times: &[f64], events: &[bool], tau: f64) -> f64 {
    let curve = km_bruteforce(times, events);
    let mut area = 0.0;
    let mut prev = 0.0;
    let mut level = 1.0;
    for &(t, s) in curve.iter().filter(|(t, _)| *t <= tau) {
        area += level * (t - prev);
        prev = t;
        level = s;
    }
    area + level * (tau - prev)
}

/// Weighted least squares via the normal equations.
pub fn wls(z: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = z[0].len();
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for ((row, &yi), &wi) in z.iter().zip(y).zip(w) {
        let r = DVector::from_column_slice(row);
        a += &r * r.transpose() * wi;
        b += r * (wi * yi);
    }
    a.lu()
        .solve(&b)
        .expect("non-singular")
        .iter()
        .copied()
        .collect()
}

/// Newton's method with a forward-difference Jacobian.
pub fn fd_newton(f: impl Fn(&[f64]) -> Vec<f64>, start: Vec<f64>) -> Vec<f64> {
    let p = start.len();
    let mut x = start;
    for _ in 0..50 {
        let fx = f(&x);
        let mut jac = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xh = x.clone();
            xh[j] += h;
            let fh = f(&xh);
            for i in 0..p {
                jac[(i, j)] = (fh[i] - fx[i]) / h;
            }
        }
        let step = jac.lu().solve(&DVector::from_vec(fx)).expect("jacobian");
        let mut small = true;
        for j in 0..p {
            x[j] -= step[j];
            small &= step[j].abs() <= 1e-13 * x[j].abs().max(1.0);
        }
        if small {
            break;
        }
    }
    x
}

/// Breslow partial log-likelihood of a single covariate, summed term by term.
pub fn cox_loglik(times: &[f64], events: &[bool], x: &[f64], beta: f64) -> f64 {
    (0..times.len())
        .filter(|&i| events[i])
        .map(|i| {
            let denom: f64 = (0..times.len())
                .filter(|&j| times[j] >= times[i])
                .map(|j| (beta * x[j]).exp())
                .sum();
            beta * x[i] - denom.ln()
        })
        .sum()
}

/// Golden-section maximizer on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Every multiset of `(time, event)` pairs with `1..=max_n` members, times in `1..=max_time`.
pub fn all_small_datasets(max_n: usize, max_time: usize) -> Vec<(Vec<f64>, Vec<bool>)> {
    let kinds: Vec<(f64, bool)> = (1..=max_time)
        .flat_map(|t| [(t as f64, true), (t as f64, false)])
        .collect();
    let mut out = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    fn rec(
        kinds: &[(f64, bool)],
        start: usize,
        max_n: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<(Vec<f64>, Vec<bool>)>,
    ) {
        if !current.is_empty() {
            out.push((
                current.iter().map(|&k| kinds[k].0).collect(),
                current.iter().map(|&k| kinds[k].1).collect(),
            ));
        }
        if current.len() == max_n {
            return;
        }
        for k in start..kinds.len() {
            current.push(k);
            rec(kinds, k, max_n, current, out);
            current.pop();
        }
    }
    rec(&kinds, 0, max_n, &mut current, &mut out);
    out
}
