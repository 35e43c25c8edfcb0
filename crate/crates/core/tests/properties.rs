mod common;

use proptest::prelude::*;
use rmst_core::dataset::{read_dataset, write_dataset, Dataset, DatasetSchema};
use rmst_core::design::{Design, GROUP, INTERCEPT};
use rmst_core::ipcw::ipcw_weights;
use rmst_core::pseudo::{fit_pseudo_gee, pseudo_values, PseudoValueSet};
use rmst_core::{
    censoring_km, fit_coxph, fit_ipcw, km_fit, rmst, rmst_diff_test, Group, Link, Reference,
    SurvivalSample,
};

use common::*;

/// Times on a coarse grid so that ties between events and censorings are common.
fn dataset(max_n: usize) -> impl Strategy<Value = Vec<SurvivalSample>> {
    prop::collection::vec(
        (1u32..=12, any::<bool>(), 0.0f64..10.0, 0.0f64..1.0),
        4..max_n,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (t, e, a, b))| {
                let g = if i % 2 == 0 {
                    Group::Treatment
                } else {
                    Group::Control
                };
                SurvivalSample::new(format!("s{i}"), f64::from(t) * 0.5, e, g)
                    .with_covariates(vec![a, b])
            })
            .collect()
    })
}

/// Continuous times, no censoring.
fn complete_dataset(max_n: usize) -> impl Strategy<Value = Vec<SurvivalSample>> {
    prop::collection::vec((0.01f64..5.0, 0.0f64..10.0, 0.0f64..1.0), 6..max_n).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (t, a, b))| {
                let g = if i % 2 == 0 {
                    Group::Treatment
                } else {
                    Group::Control
                };
                SurvivalSample::new(format!("s{i}"), t, true, g).with_covariates(vec![a, b])
            })
            .collect()
    })
}

fn has_event(d: &[SurvivalSample]) -> bool {
    d.iter().any(|s| s.event)
}

fn largest(d: &[SurvivalSample]) -> f64 {
    d.iter().map(|s| s.time).fold(0.0, f64::max)
}

fn covariate_design(d: &[SurvivalSample]) -> Design {
    Design::intercept_group_covariates(d, &["a".into(), "b".into()]).unwrap()
}

fn unpack(d: &[SurvivalSample]) -> (Vec<f64>, Vec<bool>) {
    d.iter().map(|s| (s.time, s.event)).unzip()
}

fn rescaled(pv: &PseudoValueSet, c: f64, shift: f64) -> PseudoValueSet {
    PseudoValueSet {
        values: pv.values.iter().map(|v| c * v + shift).collect(),
        tau: pv.tau,
        pooled_rmst: c * pv.pooled_rmst + shift,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn km_is_a_survival_curve_matching_risk_sets(d in dataset(40)) {
        prop_assume!(has_event(&d));
        let km = km_fit(&d).unwrap();
        let (t, e) = unpack(&d);
        let oracle = km_bruteforce(&t, &e);
        prop_assert_eq!(km.eval(0.0), 1.0);
        for w in km.values.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for k in 0..=14 {
            let x = f64::from(k) * 0.5;
            prop_assert!((km.eval(x) - km_eval(&oracle, x)).abs() < 1e-12);
            prop_assert!((km.left_limit(x + 0.25) - km.eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn censoring_km_is_km_with_flags_reversed(d in dataset(40)) {
        prop_assume!(d.iter().any(|s| !s.event));
        let flipped: Vec<SurvivalSample> = d
            .iter()
            .map(|s| SurvivalSample { event: !s.event, ..s.clone() })
            .collect();
        let g = censoring_km(&d).unwrap();
        let reversed = km_fit(&flipped).unwrap();
        prop_assert_eq!(g.jump_times, reversed.jump_times);
        prop_assert_eq!(g.values, reversed.values);
    }

    #[test]
    fn rmst_is_monotone_and_bounded(d in dataset(40), a in 0.1f64..1.0, b in 0.1f64..1.0) {
        prop_assume!(has_event(&d));
        let km = km_fit(&d).unwrap();
        let top = largest(&d);
        let (lo, hi) = (a.min(b) * top, a.max(b) * top);
        let r_lo = rmst(&km, lo, d.len()).unwrap();
        let r_hi = rmst(&km, hi, d.len()).unwrap();
        prop_assert!(r_lo.estimate <= r_hi.estimate + 1e-12);
        prop_assert!(r_hi.estimate <= hi + 1e-12 && r_lo.estimate >= 0.0);
        prop_assert!(r_hi.variance >= 0.0);
        let (t, e) = unpack(&d);
        prop_assert!((r_hi.estimate - rmst_bruteforce(&t, &e, hi)).abs() < 1e-10);
    }

    #[test]
    fn diff_test_is_internally_consistent(d in dataset(40)) {
        let tau = 0.5;
        if let Ok(r) = rmst_diff_test(&d, tau, Reference::Normal) {
            prop_assert!((r.diff - (r.treatment.estimate - r.control.estimate)).abs() < 1e-12);
            prop_assert!(r.ci_low <= r.diff && r.diff <= r.ci_high);
            if r.se > 0.0 {
                prop_assert!((r.z - r.diff / r.se).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }

    #[test]
    fn identical_arms_give_zero_difference(d in dataset(20)) {
        prop_assume!(has_event(&d));
        let both: Vec<SurvivalSample> = d
            .iter()
            .flat_map(|s| {
                [Group::Treatment, Group::Control]
                    .map(|g| SurvivalSample { id: format!("{}{g}", s.id), group: g, ..s.clone() })
            })
            .collect();
        let r = rmst_diff_test(&both, largest(&d) * 0.5, Reference::Normal).unwrap();
        prop_assert!(r.diff.abs() < 1e-12);
        prop_assert!(r.p_value > 0.999_999 || r.se == 0.0);
    }

    #[test]
    fn jackknife_mean_equals_pooled_estimate(d in dataset(40), frac in 0.2f64..1.0) {
        prop_assume!(has_event(&d));
        if let Ok(pv) = pseudo_values(&d, frac * largest(&d)) {
            prop_assert!((pv.mean() - pv.pooled_rmst).abs() < 1e-10);
        }
    }

    #[test]
    fn complete_data_pseudo_values_are_truncated_times(d in complete_dataset(30), frac in 0.2f64..1.0) {
        let tau = frac * largest(&d);
        let pv = pseudo_values(&d, tau).unwrap();
        for (s, v) in d.iter().zip(&pv.values) {
            prop_assert!((v - s.time.min(tau)).abs() < 1e-10);
        }
    }

    #[test]
    fn complete_data_collapses_to_least_squares(d in complete_dataset(30), frac in 0.2f64..1.0) {
        let tau = frac * largest(&d);
        let design = covariate_design(&d);
        let rows: Vec<Vec<f64>> = (0..d.len()).map(|i| design.matrix.row(i).iter().copied().collect()).collect();
        let y: Vec<f64> = d.iter().map(|s| s.time.min(tau)).collect();
        let ols = wls(&rows, &y, &vec![1.0; d.len()]);
        let andersen = fit_pseudo_gee(&pseudo_values(&d, tau).unwrap(), &design, Link::Identity).unwrap();
        let tian = fit_ipcw(&d, &design, tau, Link::Identity).unwrap();
        for j in 0..ols.len() {
            let scale = ols[j].abs().max(1.0);
            prop_assert!((andersen.coefficients[j] - ols[j]).abs() < 1e-8 * scale);
            prop_assert!((tian.coefficients[j] - ols[j]).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn closed_forms_solve_their_estimating_equations(d in dataset(30), frac in 0.3f64..0.9) {
        prop_assume!(has_event(&d));
        let tau = frac * largest(&d);
        let design = covariate_design(&d);
        let p = design.ncols();
        if let Ok(pv) = pseudo_values(&d, tau) {
            if let Ok(fit) = fit_pseudo_gee(&pv, &design, Link::Identity) {
                let root = fd_newton(
                    |b| rmst_core::pseudo::estimating_function(&pv, &design, b, Link::Identity),
                    vec![0.0; p],
                );
                for j in 0..p {
                    prop_assert!((fit.coefficients[j] - root[j]).abs() < 1e-8 * root[j].abs().max(1.0));
                }
            }
        }
        if let (Ok(w), Ok(fit)) = (ipcw_weights(&d, tau), fit_ipcw(&d, &design, tau, Link::Identity)) {
            let root = fd_newton(
                |b| rmst_core::ipcw::estimating_function(&w, &design, b, Link::Identity),
                vec![0.0; p],
            );
            for j in 0..p {
                prop_assert!((fit.coefficients[j] - root[j]).abs() < 1e-8 * root[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn pseudo_regression_is_scale_and_shift_equivariant(
        d in dataset(40),
        c in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        prop_assume!(has_event(&d));
        let Ok(pv) = pseudo_values(&d, 0.6 * largest(&d)) else { return Ok(()) };
        let design = covariate_design(&d);
        let Ok(base) = fit_pseudo_gee(&pv, &design, Link::Identity) else { return Ok(()) };
        let scaled = fit_pseudo_gee(&rescaled(&pv, c, 0.0), &design, Link::Identity).unwrap();
        let shifted = fit_pseudo_gee(&rescaled(&pv, 1.0, shift), &design, Link::Identity).unwrap();
        let g = design.column_index(GROUP).unwrap();
        let i = design.column_index(INTERCEPT).unwrap();
        for j in 0..design.ncols() {
            let tol = 1e-8 * base.coefficients[j].abs().max(1.0);
            prop_assert!((scaled.coefficients[j] - c * base.coefficients[j]).abs() < c * tol);
            let expect = base.coefficients[j] + if j == i { shift } else { 0.0 };
            prop_assert!((shifted.coefficients[j] - expect).abs() < tol + 1e-8 * shift.abs());
            for k in 0..design.ncols() {
                let v = base.covariance[j][k];
                let tol = 1e-8 * v.abs().max(1e-12);
                prop_assert!((scaled.covariance[j][k] - c * c * v).abs() < c * c * tol.max(1e-10));
                prop_assert!((shifted.covariance[j][k] - v).abs() < 1e-8 * v.abs().max(1.0));
            }
        }
        prop_assert!(base.std_errors[g] >= 0.0);
    }

    #[test]
    fn covariances_are_symmetric_psd(d in dataset(40)) {
        prop_assume!(has_event(&d));
        let tau = 0.6 * largest(&d);
        let design = covariate_design(&d);
        let fits = [
            pseudo_values(&d, tau).and_then(|pv| fit_pseudo_gee(&pv, &design, Link::Identity)),
            fit_ipcw(&d, &design, tau, Link::Identity),
        ];
        for fit in fits.into_iter().flatten() {
            let p = fit.coefficients.len();
            let m = nalgebra::DMatrix::from_fn(p, p, |i, j| fit.covariance[i][j]);
            prop_assert!((&m - m.transpose()).abs().max() < 1e-9 * m.abs().max().max(1.0));
            let eig = m.symmetric_eigen().eigenvalues;
            prop_assert!(eig.iter().all(|&l| l >= -1e-9 * eig.abs().max().max(1.0)));
        }
    }

    #[test]
    fn ipcw_weights_are_positive_exactly_on_selected(d in dataset(40), frac in 0.2f64..1.0) {
        prop_assume!(has_event(&d));
        let tau = frac * largest(&d);
        if let Ok(w) = ipcw_weights(&d, tau) {
            for (i, s) in d.iter().enumerate() {
                prop_assert!(w.weights[i].is_finite() && w.weights[i] >= 0.0);
                prop_assert_eq!(w.weights[i] > 0.0, w.selected[i]);
                prop_assert_eq!(w.selected[i], s.event || s.time >= tau);
            }
        }
    }

    #[test]
    fn cox_ignores_covariate_shifts(d in dataset(40), shift in -20.0f64..20.0) {
        prop_assume!(has_event(&d));
        let rows: Vec<Vec<f64>> = d.iter().map(|s| vec![s.group.indicator(), s.covariates[0]]).collect();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1] + shift]).collect();
        let names = vec!["group".to_string(), "a".to_string()];
        let base = fit_coxph(&d, &Design::from_rows(names.clone(), &rows).unwrap());
        let other = fit_coxph(&d, &Design::from_rows(names, &moved).unwrap());
        if let (Ok(base), Ok(other)) = (base, other) {
            prop_assume!(base.converged);
            prop_assert!(other.converged);
            for j in 0..2 {
                prop_assert!((base.coefficients[j] - other.coefficients[j]).abs() < 1e-7 * base.coefficients[j].abs().max(1.0));
            }
            prop_assert!(base.score_norm < 1e-6);
        }
    }

    #[test]
    fn dataset_round_trips_through_csv(d in dataset(30)) {
        let names = vec!["a".to_string(), "b".to_string()];
        let original = Dataset { samples: d, covariate_names: names.clone() };
        let mut buf = Vec::new();
        write_dataset(&original, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), "round-trip", &DatasetSchema::canonical(&names)).unwrap();
        prop_assert_eq!(back, original);
    }
}
