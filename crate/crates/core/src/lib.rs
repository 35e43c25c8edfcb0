//! Restricted mean survival time estimation with covariate adjustment:
//! Kaplan-Meier based two-arm comparisons, pseudo-value regression, IPCW
//! regression, a Cox reference fitter and a Monte-Carlo power harness.

pub mod cox;
pub mod curve;
pub mod dataset;
pub mod design;
pub mod error;
pub mod fit;
pub mod gee;
pub mod ipcw;
pub mod km;
mod linalg;
pub mod pseudo;
pub mod report;
pub mod rmst;
pub mod sample;
pub mod sim;
pub mod stats;

pub use cox::{fit_coxph, CoxFit};
pub use curve::{export_curve, CurvePoint};
pub use dataset::{load_dataset, Dataset, DatasetSchema};
pub use design::Design;
pub use error::{Result, RmstError};
pub use fit::{FitWarning, Link, RegressionFit};
pub use ipcw::{
    fit_ipcw, fit_ipcw_with, ipcw_weights, ipcw_weights_with, IpcwOptions, IpcwWeights,
};
pub use km::{censoring_km, km_fit, StepFunction};
pub use pseudo::{
    fit_pseudo_gee, pseudo_values, pseudo_values_with, PseudoOptions, PseudoValueSet,
};
pub use report::{analyze, AnalysisOptions, AnalysisReport, Method};
pub use rmst::{rmst, rmst_diff_test, DiffTestResult, RmstEstimate};
pub use sample::{Group, SurvivalSample};
pub use stats::Reference;
