use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::scenario::{CensoringMechanism, ScenarioConfig};
use crate::error::{Result, RmstError};
use crate::sample::{Group, SurvivalSample};

/// Per-arm censoring parameter: a probability for
/// [`CensoringMechanism::RandomFraction`], a rate for
/// [`CensoringMechanism::Exponential`]. Zero disables censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoringParams {
    pub mechanism: CensoringMechanism,
    pub treatment: f64,
    pub control: f64,
}

impl CensoringParams {
    pub fn none(mechanism: CensoringMechanism) -> Self {
        Self {
            mechanism,
            treatment: 0.0,
            control: 0.0,
        }
    }

    pub fn for_arm(&self, treated: bool) -> f64 {
        if treated {
            self.treatment
        } else {
            self.control
        }
    }
}

/// Draws `(x2, T)` for one subject.
pub(crate) fn draw_event_time<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    treated: bool,
    rng: &mut R,
) -> (f64, f64) {
    let z: f64 = rng.sample(StandardNormal);
    let x2 = cfg.x2_mean(treated) + cfg.x2_variance.sqrt() * z;
    let u: f64 = rng.random();
    let eps = cfg.weibull_scale * (-(1.0 - u).ln()).powf(1.0 / cfg.weibull_shape);
    (x2, cfg.linear_predictor(treated, x2).exp() * eps)
}

/// Draws a censoring time given the event time; always consumes two uniforms.
pub(crate) fn draw_censoring_time<R: Rng + ?Sized>(
    mechanism: CensoringMechanism,
    param: f64,
    t: f64,
    tau: f64,
    rng: &mut R,
) -> f64 {
    let u_select: f64 = rng.random();
    let u_time: f64 = rng.random();
    match mechanism {
        CensoringMechanism::RandomFraction => {
            if u_select < param {
                u_time * t.min(tau)
            } else {
                f64::INFINITY
            }
        }
        CensoringMechanism::Exponential => {
            if param > 0.0 {
                -(1.0 - u_time).ln() / param
            } else {
                f64::INFINITY
            }
        }
    }
}

/// One simulated trial of `n` subjects, the first `n / 2` treated. Each
/// sample carries the single covariate `x2`.
pub fn generate_dataset<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    n: usize,
    censoring: &CensoringParams,
    rng: &mut R,
) -> Result<Vec<SurvivalSample>> {
    cfg.validate()?;
    if n < 2 || !n.is_multiple_of(2) {
        return Err(RmstError::InvalidInput(format!(
            "n must be even and at least 2, got {n}"
        )));
    }
    let samples = (0..n)
        .map(|i| {
            let treated = i < n / 2;
            let (x2, t) = draw_event_time(cfg, treated, rng);
            let c = draw_censoring_time(
                censoring.mechanism,
                censoring.for_arm(treated),
                t,
                cfg.tau,
                rng,
            );
            let group = if treated {
                Group::Treatment
            } else {
                Group::Control
            };
            SurvivalSample::new((i + 1).to_string(), t.min(c), t <= c, group)
                .with_covariates(vec![x2])
        })
        .collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::builtin_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_determinism() {
        let cfg = builtin_scenario("PH-S1").unwrap();
        let params = CensoringParams {
            mechanism: CensoringMechanism::RandomFraction,
            treatment: 0.1,
            control: 0.1,
        };
        let a = generate_dataset(&cfg, 10, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = generate_dataset(&cfg, 10, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a[..5].iter().all(|s| s.group == Group::Treatment));
        assert!(a[5..].iter().all(|s| s.group == Group::Control));
        assert!(a.iter().all(|s| s.covariates.len() == 1 && s.time >= 0.0));
    }

    #[test]
    fn odd_n_is_rejected() {
        let cfg = builtin_scenario("PH-S1").unwrap();
        let p = CensoringParams::none(CensoringMechanism::Exponential);
        assert!(generate_dataset(&cfg, 7, &p, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn no_censoring_means_all_events() {
        let cfg = builtin_scenario("CP-S5").unwrap();
        let p = CensoringParams::none(CensoringMechanism::RandomFraction);
        let d = generate_dataset(&cfg, 200, &p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(d.iter().all(|s| s.event));
    }

    #[test]
    fn unit_exponential_error_has_unit_mean() {
        let mut cfg = builtin_scenario("PH-S1").unwrap();
        cfg.beta0 = 0.0;
        cfg.beta2 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 200_000;
        let mean = (0..m)
            .map(|_| draw_event_time(&cfg, false, &mut rng).1)
            .sum::<f64>()
            / m as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }
}
