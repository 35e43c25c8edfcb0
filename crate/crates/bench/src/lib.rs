//! Shared inputs for the criterion benchmarks under `benches/`.

use rmst_core::sim::{builtin_scenario, calibrate, generate_dataset, rng::replicate_rng};
use rmst_core::{Group, SurvivalSample};

/// One replicate of a built-in scenario, reproducible from `(scenario, n)`,
/// with a restriction time inside both arms' follow-up.
pub fn scenario_data(scenario: &str, n: usize) -> (Vec<SurvivalSample>, f64) {
    let cfg = builtin_scenario(scenario).expect("built-in scenario");
    let params = calibrate(&cfg).expect("calibration");
    let mut rng = replicate_rng(0xBE4C, &cfg.name, n, 0);
    let data = generate_dataset(&cfg, n, &params, &mut rng).expect("valid scenario");
    let last = |g: Group| {
        data.iter()
            .filter(|s| s.group == g)
            .map(|s| s.time)
            .fold(0.0, f64::max)
    };
    let tau = cfg
        .tau
        .min(0.9 * last(Group::Treatment).min(last(Group::Control)));
    (data, tau)
}
