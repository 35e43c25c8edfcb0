use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// Reference distribution for Wald-type statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Normal,
    /// Student-t; the degrees of freedom are supplied by the caller.
    StudentT,
}

impl std::str::FromStr for Reference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Reference::Normal),
            "student_t" | "student-t" | "t" => Ok(Reference::StudentT),
            other => Err(format!("unknown reference distribution '{other}'")),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Two-sided p-value of `z` under the standard normal.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * standard_normal().sf(z.abs())).min(1.0)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Two-sided p-value and upper `1 - alpha/2` quantile under the chosen reference.
pub fn two_sided(z: f64, reference: Reference, df: f64, alpha: f64) -> (f64, f64) {
    match reference {
        Reference::Normal => (normal_two_sided_p(z), normal_quantile(1.0 - alpha / 2.0)),
        Reference::StudentT => {
            let t = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
            let p = if z.is_nan() {
                f64::NAN
            } else {
                (2.0 * t.sf(z.abs())).min(1.0)
            };
            (p, t.inverse_cdf(1.0 - alpha / 2.0))
        }
    }
}
