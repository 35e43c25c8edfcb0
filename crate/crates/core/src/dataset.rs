//! Schema-driven ingestion of delimited survival data.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};
use crate::sample::{Group, SurvivalSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    #[default]
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub column: String,
    #[serde(default)]
    pub kind: CovariateKind,
    /// Level absorbed into the intercept (categorical only).
    #[serde(default)]
    pub reference_level: Option<String>,
    /// Non-reference levels in dummy-column order; sorted observed levels when absent.
    #[serde(default)]
    pub levels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Any missing value in a used column is an error.
    #[default]
    Error,
    /// Rows with missing values in used columns are skipped.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    #[serde(default)]
    pub id_column: Option<String>,
    pub time_column: String,
    pub event_column: String,
    pub event_true_value: String,
    #[serde(default)]
    pub event_false_value: Option<String>,
    pub group_column: String,
    pub group_treatment_value: String,
    #[serde(default)]
    pub group_control_value: Option<String>,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub missing: MissingPolicy,
    /// Cells treated as missing in addition to the empty string.
    #[serde(default = "default_missing_tokens")]
    pub missing_tokens: Vec<String>,
}

fn default_missing_tokens() -> Vec<String> {
    vec!["NA".into()]
}

impl DatasetSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RmstError::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RmstError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
            .map_err(|e| RmstError::Config(format!("{}: {e}", path.display())))
    }

    /// Schema of the files written by [`write_dataset`].
    pub fn canonical(covariate_names: &[String]) -> Self {
        Self {
            id_column: Some("id".into()),
            time_column: "time".into(),
            event_column: "event".into(),
            event_true_value: "1".into(),
            event_false_value: Some("0".into()),
            group_column: "group".into(),
            group_treatment_value: "treatment".into(),
            group_control_value: Some("control".into()),
            covariates: covariate_names
                .iter()
                .map(|c| CovariateSpec {
                    column: c.clone(),
                    kind: CovariateKind::Numeric,
                    reference_level: None,
                    levels: None,
                })
                .collect(),
            missing: MissingPolicy::Error,
            missing_tokens: default_missing_tokens(),
        }
    }
}

/// Loaded samples with the names of their (dummy-expanded) covariate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<SurvivalSample>,
    pub covariate_names: Vec<String>,
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file =
        std::fs::File::open(path).map_err(|e| RmstError::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file, &path.display().to_string(), schema)
}

/// Parses a comma-delimited table with a header row. `name` labels error messages.
pub fn read_dataset<R: Read>(input: R, name: &str, schema: &DatasetSchema) -> Result<Dataset> {
    let err = |row: usize, column: &str, message: String| RmstError::Data {
        file: name.to_string(),
        row,
        column: column.to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| err(1, "", e.to_string()))?
        .clone();
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let col = |c: &str| -> Result<usize> {
        index
            .get(c)
            .copied()
            .ok_or_else(|| err(1, c, "missing column".into()))
    };
    let id_col = schema.id_column.as_deref().map(col).transpose()?;
    let time_col = col(&schema.time_column)?;
    let event_col = col(&schema.event_column)?;
    let group_col = col(&schema.group_column)?;
    let cov_cols = schema
        .covariates
        .iter()
        .map(|c| col(&c.column))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            err(row, "", e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        records.push((row, rec));
    }
    if records.is_empty() {
        return Err(RmstError::InvalidInput(format!("{name}: no data rows")));
    }

    let is_missing =
        |v: &str| v.trim().is_empty() || schema.missing_tokens.iter().any(|m| m == v.trim());
    let mut used: Vec<(usize, &str)> = vec![
        (time_col, schema.time_column.as_str()),
        (event_col, schema.event_column.as_str()),
        (group_col, schema.group_column.as_str()),
    ];
    used.extend(
        cov_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&i, c)| (i, c.column.as_str())),
    );
    let mut kept = Vec::new();
    for (row, rec) in &records {
        let missing = used
            .iter()
            .find(|&&(i, _)| is_missing(rec.get(i).unwrap_or("")));
        match (missing, schema.missing) {
            (Some(&(_, c)), MissingPolicy::Error) => {
                return Err(err(*row, c, "missing value".into()))
            }
            (Some(_), MissingPolicy::Drop) => {}
            (None, _) => kept.push((*row, rec)),
        }
    }
    if kept.is_empty() {
        return Err(RmstError::InvalidInput(format!(
            "{name}: no complete data rows"
        )));
    }

    // dummy columns per categorical covariate
    let mut covariate_names = Vec::new();
    let mut dummy_levels: Vec<Option<Vec<String>>> = Vec::new();
    for (spec, &ci) in schema.covariates.iter().zip(&cov_cols) {
        match spec.kind {
            CovariateKind::Numeric => {
                covariate_names.push(spec.column.clone());
                dummy_levels.push(None);
            }
            CovariateKind::Categorical => {
                let reference = spec.reference_level.clone().ok_or_else(|| {
                    RmstError::Config(format!(
                        "categorical covariate '{}' needs reference_level",
                        spec.column
                    ))
                })?;
                let mut observed: Vec<String> =
                    kept.iter().map(|(_, r)| r[ci].trim().to_string()).collect();
                observed.sort();
                observed.dedup();
                if !observed.contains(&reference) {
                    return Err(err(
                        1,
                        &spec.column,
                        format!("reference level '{reference}' not present in data"),
                    ));
                }
                let levels = match &spec.levels {
                    Some(l) => l.clone(),
                    None => observed
                        .iter()
                        .filter(|l| **l != reference)
                        .cloned()
                        .collect(),
                };
                for (row, rec) in &kept {
                    let v = rec[ci].trim();
                    if v != reference && !levels.iter().any(|l| l == v) {
                        return Err(err(*row, &spec.column, format!("unknown level '{v}'")));
                    }
                }
                covariate_names.extend(levels.iter().map(|l| format!("{}({l})", spec.column)));
                dummy_levels.push(Some(levels));
            }
        }
    }

    let mut samples = Vec::with_capacity(kept.len());
    for (k, (row, rec)) in kept.iter().enumerate() {
        let row = *row;
        let number = |i: usize, c: &str| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| err(row, c, format!("cannot parse '{}' as a number", &rec[i])))
        };
        let time = number(time_col, &schema.time_column)?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(
                row,
                &schema.time_column,
                format!("time must be non-negative, got {time}"),
            ));
        }
        let ev = rec[event_col].trim();
        let event = if ev == schema.event_true_value {
            true
        } else if schema.event_false_value.as_deref().is_none_or(|f| f == ev) {
            false
        } else {
            return Err(err(
                row,
                &schema.event_column,
                format!("unexpected event value '{ev}'"),
            ));
        };
        let gv = rec[group_col].trim();
        let group = if gv == schema.group_treatment_value {
            Group::Treatment
        } else if schema
            .group_control_value
            .as_deref()
            .is_none_or(|c| c == gv)
        {
            Group::Control
        } else {
            return Err(err(
                row,
                &schema.group_column,
                format!("unexpected group value '{gv}'"),
            ));
        };
        let mut covariates = Vec::with_capacity(covariate_names.len());
        for ((spec, &ci), levels) in schema.covariates.iter().zip(&cov_cols).zip(&dummy_levels) {
            match levels {
                None => covariates.push(number(ci, &spec.column)?),
                Some(levels) => {
                    let v = rec[ci].trim();
                    covariates.extend(levels.iter().map(|l| if l == v { 1.0 } else { 0.0 }));
                }
            }
        }
        let id = match id_col {
            Some(i) => rec[i].trim().to_string(),
            None => (k + 1).to_string(),
        };
        samples.push(SurvivalSample {
            id,
            time,
            event,
            group,
            covariates,
        });
    }
    Ok(Dataset {
        samples,
        covariate_names,
    })
}

/// Writes `id,time,event,group,<covariates>`, readable with [`DatasetSchema::canonical`].
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| RmstError::Io(e.to_string());
    let mut header = vec![
        "id".to_string(),
        "time".into(),
        "event".into(),
        "group".into(),
    ];
    header.extend(dataset.covariate_names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for s in &dataset.samples {
        let mut rec = vec![
            s.id.clone(),
            s.time.to_string(),
            u8::from(s.event).to_string(),
            s.group.to_string(),
        ];
        rec.extend(s.covariates.iter().map(f64::to_string));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-arm counts in the style "72.22% (52/72)".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub group: Group,
    pub n: usize,
    pub events: usize,
    pub censored: usize,
    pub censoring_percent: f64,
}

impl ArmSummary {
    pub fn censoring_label(&self) -> String {
        format!(
            "{:.2}% ({}/{})",
            self.censoring_percent, self.censored, self.n
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub events: usize,
    pub arms: Vec<ArmSummary>,
}

pub fn summarize(samples: &[SurvivalSample]) -> DatasetSummary {
    let arms = [Group::Treatment, Group::Control]
        .into_iter()
        .map(|g| {
            let n = samples.iter().filter(|s| s.group == g).count();
            let events = samples.iter().filter(|s| s.group == g && s.event).count();
            ArmSummary {
                group: g,
                n,
                events,
                censored: n - events,
                censoring_percent: if n == 0 {
                    0.0
                } else {
                    100.0 * (n - events) as f64 / n as f64
                },
            }
        })
        .collect();
    DatasetSummary {
        n: samples.len(),
        events: samples.iter().filter(|s| s.event).count(),
        arms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> DatasetSchema {
        DatasetSchema::from_toml_str(
            r#"
            id_column = "ID"
            time_column = "Time"
            event_column = "Censor"
            event_true_value = "No"
            event_false_value = "Yes"
            group_column = "Group"
            group_treatment_value = "Treatment"

            [[covariates]]
            column = "Age"

            [[covariates]]
            column = "Stage"
            kind = "categorical"
            reference_level = "1"
            "#,
        )
        .unwrap()
    }

    const CSV: &str = "ID,Time,Censor,Group,Age,Stage\n1,20,Yes,Treatment,60,1\n2,40,No,Treatment,80,2\n3,30,No,Control,70,3\n";

    #[test]
    fn parses_events_groups_and_dummies() {
        let d = read_dataset(CSV.as_bytes(), "t.csv", &schema()).unwrap();
        assert_eq!(d.covariate_names, vec!["Age", "Stage(2)", "Stage(3)"]);
        assert!(!d.samples[0].event && d.samples[1].event);
        assert_eq!(d.samples[2].group, Group::Control);
        assert_eq!(d.samples[2].covariates, vec![70.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_file_has_no_data_rows() {
        let e = read_dataset(
            "ID,Time,Censor,Group,Age,Stage\n".as_bytes(),
            "e.csv",
            &schema(),
        )
        .unwrap_err();
        assert!(e.to_string().contains("no data rows"));
    }

    #[test]
    fn errors_name_file_row_and_column() {
        let bad = CSV.replace("80,2", "eighty,2");
        let e = read_dataset(bad.as_bytes(), "t.csv", &schema())
            .unwrap_err()
            .to_string();
        assert!(
            e.contains("t.csv") && e.contains("row 3") && e.contains("'Age'"),
            "{e}"
        );

        let e = read_dataset(
            "ID,Time,Censor,Group,Age\n1,2,No,Control,3\n".as_bytes(),
            "m.csv",
            &schema(),
        )
        .unwrap_err()
        .to_string();
        assert!(
            e.contains("m.csv") && e.contains("'Stage'") && e.contains("missing column"),
            "{e}"
        );

        let bad = CSV.replace("No,Control", "Maybe,Control");
        let e = read_dataset(bad.as_bytes(), "t.csv", &schema())
            .unwrap_err()
            .to_string();
        assert!(e.contains("row 4") && e.contains("'Censor'"), "{e}");
    }

    #[test]
    fn missing_values_error_or_drop() {
        let bad = CSV.replace("80,2", "NA,2");
        let e = read_dataset(bad.as_bytes(), "t.csv", &schema())
            .unwrap_err()
            .to_string();
        assert!(e.contains("row 3") && e.contains("missing value"));
        let mut s = schema();
        s.missing = MissingPolicy::Drop;
        assert_eq!(
            read_dataset(bad.as_bytes(), "t.csv", &s)
                .unwrap()
                .samples
                .len(),
            2
        );
    }

    #[test]
    fn unknown_level_is_rejected() {
        let mut s = schema();
        s.covariates[1].levels = Some(vec!["2".into()]);
        let e = read_dataset(CSV.as_bytes(), "t.csv", &s)
            .unwrap_err()
            .to_string();
        assert!(
            e.contains("unknown level '3'") && e.contains("row 4"),
            "{e}"
        );
    }

    #[test]
    fn round_trip() {
        let d = read_dataset(CSV.as_bytes(), "t.csv", &schema()).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let back = read_dataset(
            buf.as_slice(),
            "rt.csv",
            &DatasetSchema::canonical(&d.covariate_names),
        )
        .unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn censoring_label() {
        let s: Vec<_> = (0..72)
            .map(|i| SurvivalSample::new(i.to_string(), 1.0, i < 20, Group::Treatment))
            .collect();
        let sum = summarize(&s);
        assert_eq!(sum.arms[0].censoring_label(), "72.22% (52/72)");
    }
}
