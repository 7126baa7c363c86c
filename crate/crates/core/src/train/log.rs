use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::binio::write_file;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Adversarial,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Adversarial => "adversarial",
        }
    }
}

/// One optimisation iteration. Fields that a stage does not compute are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub stage: Stage,
    pub iter: usize,
    pub lr: f64,
    pub loss_cls: f64,
    pub loss_d: Option<f64>,
    pub loss_g_adv: Option<f64>,
    pub loss_g_total: Option<f64>,
    pub d_real: Option<f64>,
    pub d_fake: Option<f64>,
    /// Accuracy over the whole training pool, filled on evaluation iterations.
    pub train_acc: Option<f64>,
}

/// Append-only training history. Wall-clock time is kept in memory only,
/// so the persisted table is reproducible byte for byte.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub wall_clock: Duration,
}

pub const LOG_COLUMNS: [&str; 10] = [
    "stage",
    "iter",
    "lr",
    "loss_cls",
    "loss_d",
    "loss_g_adv",
    "loss_g_total",
    "d_real",
    "d_fake",
    "train_acc",
];

impl TrainLog {
    pub fn push(&mut self, rec: TrainRecord) {
        if let Some(last) = self.records.iter().rev().find(|r| r.stage == rec.stage) {
            assert!(rec.iter > last.iter, "iterations must increase within a stage");
        }
        self.records.push(rec);
    }

    pub fn extend(&mut self, other: TrainLog) {
        for r in other.records {
            self.push(r);
        }
        self.wall_clock += other.wall_clock;
    }

    pub fn last(&self, stage: Stage) -> Option<&TrainRecord> {
        self.records.iter().rev().find(|r| r.stage == stage)
    }

    /// Most recent evaluated training accuracy of a stage.
    pub fn final_train_acc(&self, stage: Stage) -> Option<f64> {
        self.records
            .iter()
            .rev()
            .filter(|r| r.stage == stage)
            .find_map(|r| r.train_acc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = LOG_COLUMNS.join(",");
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{},{},{},{},{},{}",
                r.stage.tag(),
                r.iter,
                r.lr,
                r.loss_cls,
                opt(r.loss_d),
                opt(r.loss_g_adv),
                opt(r.loss_g_total),
                opt(r.d_real),
                opt(r.d_fake),
                opt(r.train_acc),
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(stage: Stage, iter: usize) -> TrainRecord {
        TrainRecord {
            stage,
            iter,
            lr: 0.1,
            loss_cls: 1.5,
            loss_d: None,
            loss_g_adv: None,
            loss_g_total: None,
            d_real: None,
            d_fake: None,
            train_acc: Some(0.5),
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut log = TrainLog::default();
        log.push(rec(Stage::Pretrain, 1));
        log.push(rec(Stage::Pretrain, 2));
        log.push(rec(Stage::Adversarial, 1));
        let csv = log.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], LOG_COLUMNS.join(","));
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "pretrain,1,0.1,1.5,,,,,,0.5");
        assert_eq!(log.final_train_acc(Stage::Pretrain), Some(0.5));
    }

    #[test]
    #[should_panic]
    fn iterations_must_increase() {
        let mut log = TrainLog::default();
        log.push(rec(Stage::Pretrain, 2));
        log.push(rec(Stage::Pretrain, 2));
    }
}
