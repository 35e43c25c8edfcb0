use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;

use super::generate::{draw_censoring_time, draw_event_time, CensoringParams};
use super::rng::{replicate_rng, CALIBRATION_SEED, VALIDATION_SEED};
use super::scenario::{CensoringMechanism, ScenarioConfig};
use crate::error::Result;

/// Draws used to calibrate the exponential censoring rate.
pub const CALIBRATION_DRAWS: usize = 200_000;
const BISECTION_STEPS: usize = 100;

type CacheKey = (String, bool);

fn cache() -> &'static Mutex<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Censoring parameter of one arm such that `P(C < min(T, tau))` equals the
/// arm's target. For [`CensoringMechanism::RandomFraction`] this is the target
/// itself; for [`CensoringMechanism::Exponential`] the rate is found by
/// bisection over a fixed Monte-Carlo sample. A zero target gives zero.
pub fn calibrate_censoring(cfg: &ScenarioConfig, treated: bool) -> Result<f64> {
    cfg.validate()?;
    let target = cfg.censor_target(treated);
    if target <= 0.0 {
        return Ok(0.0);
    }
    match cfg.censoring {
        CensoringMechanism::RandomFraction => Ok(target),
        CensoringMechanism::Exponential => {
            let key = (cfg.to_toml(), treated);
            if let Some(&v) = cache().lock().expect("calibration cache").get(&key) {
                return Ok(v);
            }
            let rate = exponential_rate(cfg, treated, target);
            cache().lock().expect("calibration cache").insert(key, rate);
            Ok(rate)
        }
    }
}

pub fn calibrate(cfg: &ScenarioConfig) -> Result<CensoringParams> {
    Ok(CensoringParams {
        mechanism: cfg.censoring,
        treatment: calibrate_censoring(cfg, true)?,
        control: calibrate_censoring(cfg, false)?,
    })
}

fn exponential_rate(cfg: &ScenarioConfig, treated: bool, target: f64) -> f64 {
    let mut rng = replicate_rng(CALIBRATION_SEED, &cfg.name, usize::from(treated), 0);
    // with C = E / rate, C < m  <=>  rate > E / m
    let mut thresholds: Vec<f64> = (0..CALIBRATION_DRAWS)
        .map(|_| {
            let (_, t) = draw_event_time(cfg, treated, &mut rng);
            let e = -(1.0 - rng.random::<f64>()).ln();
            e / t.min(cfg.tau)
        })
        .collect();
    thresholds.sort_by(f64::total_cmp);
    let fraction =
        |rate: f64| thresholds.partition_point(|&x| x < rate) as f64 / CALIBRATION_DRAWS as f64;
    let (mut lo, mut hi) = (0.0, 1.0);
    while fraction(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if fraction(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of `draws` simulated subjects of one arm censored before
/// `min(T, tau)`, using an independent validation stream.
pub fn realized_censoring(
    cfg: &ScenarioConfig,
    params: &CensoringParams,
    treated: bool,
    draws: usize,
) -> f64 {
    let mut rng = replicate_rng(VALIDATION_SEED, &cfg.name, usize::from(treated), 0);
    let censored = (0..draws)
        .filter(|_| {
            let (_, t) = draw_event_time(cfg, treated, &mut rng);
            let c = draw_censoring_time(
                params.mechanism,
                params.for_arm(treated),
                t,
                cfg.tau,
                &mut rng,
            );
            c < t.min(cfg.tau)
        })
        .count();
    censored as f64 / draws as f64
}
