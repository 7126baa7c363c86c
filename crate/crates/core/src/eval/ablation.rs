use std::fmt::Write as _;

use serde::Serialize;

use super::EvaluationReport;
use crate::error::{Error, Result};

/// Ratios compared across ablation variants.
pub const ABLATION_RATIOS: [f64; 3] = [0.1, 0.3, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub name: String,
    pub accuracy: [f64; 3],
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Row `a` minus row `b`, column by column, followed by the mean delta.
    pub fn delta(&self, a: &str, b: &str) -> Option<[f64; 4]> {
        let (ra, rb) = (self.row(a)?, self.row(b)?);
        let mut d = [0.0; 4];
        for i in 0..3 {
            d[i] = ra.accuracy[i] - rb.accuracy[i];
        }
        d[3] = ra.mean - rb.mean;
        Some(d)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(7);
        writeln!(s, "{:<w$}  {:>7}  {:>7}  {:>7}  {:>7}", "variant", "r=0.1", "r=0.3", "r=0.5", "mean").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{:<w$}  {:>6.2}%  {:>6.2}%  {:>6.2}%  {:>6.2}%",
                r.name,
                100.0 * r.accuracy[0],
                100.0 * r.accuracy[1],
                100.0 * r.accuracy[2],
                100.0 * r.mean
            )
            .unwrap();
        }
        s
    }
}

/// Accuracy at the ablation ratios and their mean, one row per report.
pub fn compare_ablations(reports: &[(&str, &EvaluationReport)]) -> Result<AblationTable> {
    let Some((_, first)) = reports.first() else {
        return Err(Error::Empty("ablation reports"));
    };
    let mut rows = Vec::with_capacity(reports.len());
    for (name, r) in reports {
        if r.classes != first.classes || r.segments != first.segments || r.fingerprint != first.fingerprint {
            return Err(Error::Mismatch(format!("report '{name}' was computed on a different test set")));
        }
        let mut accuracy = [0.0; 3];
        for (a, &ratio) in accuracy.iter_mut().zip(&ABLATION_RATIOS) {
            *a = r.accuracy_at(ratio);
        }
        rows.push(AblationRow {
            name: name.to_string(),
            accuracy,
            mean: accuracy.iter().sum::<f64>() / 3.0,
        });
    }
    Ok(AblationTable { rows })
}
