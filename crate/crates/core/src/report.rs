//! Flat defect records shared by every checking layer.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_defect(defect: f64, tolerance: f64) -> Self {
        // NaN never passes
        if defect <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// One `(law, property, max defect, tolerance, verdict)` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectRecord {
    pub law: String,
    pub property: String,
    pub max_defect: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl DefectRecord {
    pub fn new(law: impl Into<String>, property: impl Into<String>, max_defect: f64, tolerance: f64) -> Self {
        let max_defect = if max_defect.is_nan() { f64::INFINITY } else { max_defect };
        Self {
            law: law.into(),
            property: property.into(),
            max_defect,
            tolerance,
            verdict: Verdict::from_defect(max_defect, tolerance),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

/// Find a record by property name.
pub fn find<'a>(records: &'a [DefectRecord], property: &str) -> Option<&'a DefectRecord> {
    records.iter().find(|r| r.property == property)
}

pub fn all_pass(records: &[DefectRecord]) -> bool {
    records.iter().all(DefectRecord::passed)
}

/// CSV with a `law,property,max_defect,tolerance,verdict` header. Defects
/// are written with 17 significant digits.
pub fn write_records<W: Write>(out: W, records: &[DefectRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["law", "property", "max_defect", "tolerance", "verdict"])?;
    for r in records {
        w.write_record([
            r.law.as_str(),
            r.property.as_str(),
            &format_real(r.max_defect),
            &format_real(r.tolerance),
            match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Round-trip exact text form of a float (17 significant digits).
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
