use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmstError};
use crate::km::StepFunction;

/// One plotted point of a survival curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub survival: f64,
}

/// `(0, 1)` followed by one point per jump. The start moves left of zero if
/// the curve jumps at negative times (possible for pseudo-values).
pub fn export_curve(surv: &StepFunction) -> Vec<CurvePoint> {
    let start = surv.jump_times.first().map_or(0.0, |&t| t.min(0.0));
    std::iter::once(CurvePoint {
        time: start,
        survival: 1.0,
    })
    .chain(
        surv.jump_times
            .iter()
            .zip(&surv.values)
            .map(|(&time, &survival)| CurvePoint { time, survival }),
    )
    .collect()
}

/// Writes `time,survival` with a header and shortest round-trip decimal formatting.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(|e| RmstError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(input: R) -> Result<Vec<CurvePoint>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| RmstError::Io(e.to_string())))
        .collect()
}
