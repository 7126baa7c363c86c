use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation ratios reported in the threshold table.
pub const THRESHOLD_RATIOS: [f64; 3] = [0.1, 0.5, 1.0];
/// Per-class accuracy thresholds.
pub const THRESHOLD_TAUS: [f64; 3] = [0.6, 0.8, 0.9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: usize,
    pub segments: usize,
    /// Test-set fingerprint; reports are only comparable when it matches.
    pub fingerprint: u64,
    /// Per-sequence accuracy at `k = 1..=K` (primary measure).
    pub accuracy: Vec<f64>,
    /// Unweighted mean of per-class accuracies at each `k`.
    pub class_mean_accuracy: Vec<f64>,
    /// `per_class[c][k-1]`; `None` for classes absent from the test set.
    pub per_class: Vec<Vec<Option<f64>>>,
    pub class_counts: Vec<usize>,
    /// `confusion[k-1][true][predicted]`.
    pub confusion: Vec<Vec<Vec<usize>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub ratios: Vec<f64>,
    pub taus: Vec<f64>,
    /// `percent[tau][ratio]`: share of classes at or above `tau`, in percent.
    pub percent: Vec<Vec<f64>>,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: Vec<Vec<Vec<usize>>>, fingerprint: u64) -> Self {
        let segments = confusion.len();
        let classes = confusion.first().map_or(0, |m| m.len());
        let class_counts: Vec<usize> = (0..classes).map(|c| confusion[0][c].iter().sum()).collect();
        let total: usize = class_counts.iter().sum();
        let mut per_class = vec![vec![None; segments]; classes];
        let mut accuracy = Vec::with_capacity(segments);
        let mut class_mean_accuracy = Vec::with_capacity(segments);
        for (k, m) in confusion.iter().enumerate() {
            let hits: usize = (0..classes).map(|c| m[c][c]).sum();
            accuracy.push(hits as f64 / total as f64);
            let mut sum = 0.0;
            let mut present = 0;
            for c in 0..classes {
                if class_counts[c] > 0 {
                    let a = m[c][c] as f64 / class_counts[c] as f64;
                    per_class[c][k] = Some(a);
                    sum += a;
                    present += 1;
                }
            }
            class_mean_accuracy.push(sum / present as f64);
        }
        EvaluationReport {
            classes,
            segments,
            fingerprint,
            accuracy,
            class_mean_accuracy,
            per_class,
            class_counts,
            confusion,
        }
    }

    /// Progress level nearest to ratio `r`, at least 1.
    pub fn level(&self, r: f64) -> usize {
        ((r * self.segments as f64).round() as usize).clamp(1, self.segments)
    }

    pub fn ratio(&self, level: usize) -> f64 {
        level as f64 / self.segments as f64
    }

    pub fn accuracy_at(&self, r: f64) -> f64 {
        self.accuracy[self.level(r) - 1]
    }

    /// Unweighted mean over all `K` ratios.
    pub fn average_accuracy(&self) -> f64 {
        self.accuracy.iter().sum::<f64>() / self.segments as f64
    }

    pub fn threshold_table(&self) -> ThresholdTable {
        let present = self.class_counts.iter().filter(|&&n| n > 0).count().max(1) as f64;
        let percent = THRESHOLD_TAUS
            .iter()
            .map(|&tau| {
                THRESHOLD_RATIOS
                    .iter()
                    .map(|&r| {
                        let k = self.level(r) - 1;
                        let n = self.per_class.iter().filter(|row| row[k].is_some_and(|a| a >= tau)).count();
                        100.0 * n as f64 / present
                    })
                    .collect()
            })
            .collect();
        ThresholdTable {
            ratios: THRESHOLD_RATIOS.to_vec(),
            taus: THRESHOLD_TAUS.to_vec(),
            percent,
        }
    }

    /// The `n` best classes at a progress level, ties to the lower index.
    pub fn top_classes(&self, level: usize, n: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .per_class
            .iter()
            .enumerate()
            .filter_map(|(c, row)| row[level - 1].map(|a| (c, a)))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("ratio,accuracy\n");
        for (i, a) in self.accuracy.iter().enumerate() {
            writeln!(s, "{:.4},{:.6}", self.ratio(i + 1), a).unwrap();
        }
        s
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::new();
        for (k, m) in self.confusion.iter().enumerate() {
            writeln!(s, "# ratio {:.4}", self.ratio(k + 1)).unwrap();
            let header: Vec<String> = (0..self.classes).map(|c| format!("pred{c}")).collect();
            writeln!(s, "true,{}", header.join(",")).unwrap();
            for (c, row) in m.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|n| n.to_string()).collect();
                writeln!(s, "{c},{}", cells.join(",")).unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn text_report(&self) -> String {
        let mut s = String::new();
        writeln!(s, "classes {}  segments {}  sequences {}", self.classes, self.segments, self.class_counts.iter().sum::<usize>()).unwrap();
        writeln!(s, "average accuracy {:.2}%", 100.0 * self.average_accuracy()).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "ratio   per-sequence  class-mean").unwrap();
        for k in 0..self.segments {
            writeln!(
                s,
                "{:<7.2} {:>11.2}%  {:>9.2}%",
                self.ratio(k + 1),
                100.0 * self.accuracy[k],
                100.0 * self.class_mean_accuracy[k]
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        let t = self.threshold_table();
        writeln!(s, "classes at or above accuracy (%)").unwrap();
        let head: Vec<String> = t.ratios.iter().map(|r| format!("r={r:.1}")).collect();
        writeln!(s, "{:<8}{}", "", head.iter().map(|h| format!("{h:>9}")).collect::<String>()).unwrap();
        for (tau, row) in t.taus.iter().zip(&t.percent) {
            let cells: String = row.iter().map(|p| format!("{p:>9.2}")).collect();
            writeln!(s, ">={:<6}{cells}", format!("{:.0}%", tau * 100.0)).unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "top-5 classes per ratio").unwrap();
        for k in 1..=self.segments {
            let top: Vec<String> = self
                .top_classes(k, 5)
                .iter()
                .map(|(c, a)| format!("{c} ({:.1}%)", 100.0 * a))
                .collect();
            writeln!(s, "{:<7.2} {}", self.ratio(k), top.join(", ")).unwrap();
        }
        s
    }
}

/// Paths written by [`write_report`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub curve: PathBuf,
    pub text: PathBuf,
    pub confusion: PathBuf,
}

impl ReportFiles {
    pub fn new(dir: &Path, stem: &str) -> Self {
        ReportFiles {
            json: dir.join(format!("{stem}.json")),
            curve: dir.join(format!("{stem}_curve.csv")),
            text: dir.join(format!("{stem}.txt")),
            confusion: dir.join(format!("{stem}_confusion.csv")),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &EvaluationReport, dir: &Path, stem: &str) -> Result<ReportFiles> {
    let files = ReportFiles::new(dir, stem);
    let json = serde_json::to_string_pretty(report).expect("report serialises");
    write(&files.json, &(json + "\n"))?;
    write(&files.curve, &report.curve_csv())?;
    write(&files.text, &report.text_report())?;
    write(&files.confusion, &report.confusion_csv())?;
    Ok(files)
}

pub fn load_report(path: &Path) -> Result<EvaluationReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-ratio report from per-class (hits, count).
    fn report(cells: &[(usize, usize)]) -> EvaluationReport {
        let c = cells.len();
        let m = (0..c)
            .map(|i| {
                let mut row = vec![0; c];
                row[i] = cells[i].0;
                row[(i + 1) % c] += cells[i].1 - cells[i].0;
                row
            })
            .collect();
        EvaluationReport::from_confusion(vec![m], 0)
    }

    #[test]
    fn all_perfect_gives_full_table() {
        let t = report(&[(5, 5), (3, 3), (4, 4)]).threshold_table();
        assert!(t.percent.iter().flatten().all(|&p| p == 100.0));
    }

    #[test]
    fn half_at_085_half_at_05() {
        let t = report(&[(17, 20), (10, 20), (17, 20), (10, 20)]).threshold_table();
        assert_eq!(t.percent[0], vec![50.0; 3]);
        assert_eq!(t.percent[1], vec![50.0; 3]);
        assert_eq!(t.percent[2], vec![0.0; 3]);
    }

    #[test]
    fn overall_is_label_weighted_class_mean() {
        let r = report(&[(1, 4), (9, 10), (0, 2)]);
        let weighted: f64 = r
            .per_class
            .iter()
            .zip(&r.class_counts)
            .map(|(row, &n)| row[0].unwrap() * n as f64)
            .sum::<f64>()
            / 16.0;
        assert!((r.accuracy[0] - weighted).abs() < 1e-12);
        assert!((r.class_mean_accuracy[0] - (0.25 + 0.9 + 0.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn top_classes_break_ties_low() {
        let r = report(&[(1, 2), (2, 2), (1, 2), (0, 2)]);
        assert_eq!(r.top_classes(1, 3), vec![(1, 1.0), (0, 0.5), (2, 0.5)]);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(&[(1, 2), (2, 2)]);
        let f = write_report(&r, dir.path(), "x").unwrap();
        assert_eq!(load_report(&f.json).unwrap(), r);
        let curve = std::fs::read_to_string(&f.curve).unwrap();
        assert_eq!(curve.lines().count(), 2);
        assert!(std::fs::read_to_string(&f.text).unwrap().contains("top-5"));
    }
}
