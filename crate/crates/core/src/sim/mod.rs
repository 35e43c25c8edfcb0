//! Scenario-based Monte-Carlo comparison of the naive, pseudo-value, IPCW and
//! Cox tests for a treatment effect.

pub mod calibrate;
pub mod generate;
pub mod power;
pub mod rng;
pub mod scenario;

pub use calibrate::{calibrate, calibrate_censoring, realized_censoring};
pub use generate::{generate_dataset, CensoringParams};
pub use power::{
    method_p_values, replicate_p_values, run_power_study, run_power_study_with_progress, PowerRow,
    PowerStudy, PowerTable,
};
pub use scenario::{
    builtin_scenario, builtin_scenarios, CensoringMechanism, Family, ScenarioConfig,
};
