//! Accuracy as a function of observation ratio, per-class breakdowns,
//! ablation tables and two-stream fusion.

mod ablation;
mod report;

pub use ablation::{compare_ablations, AblationRow, AblationTable, ABLATION_RATIOS};
pub use report::{
    load_report, write_report, EvaluationReport, ReportFiles, ThresholdTable, THRESHOLD_RATIOS, THRESHOLD_TAUS,
};

use std::collections::HashMap;

use crate::binio::digest64;
use crate::data::{Dataset, FeatureSequence, PartialView};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{fuse_scores, predict, ModelBundle};
use crate::tensor::argmax;

/// Anything that scores partial views. Ties in the resulting argmax go to the
/// lowest class index.
pub trait Predictor: Sync {
    fn scores(&self, view: &PartialView) -> Result<Vec<f64>>;
}

impl Predictor for ModelBundle {
    fn scores(&self, view: &PartialView) -> Result<Vec<f64>> {
        predict(view, self).map(|(_, s)| s)
    }
}

/// Order-independent digest of a test set's (id, label) pairs.
pub fn test_set_fingerprint(test: &Dataset) -> u64 {
    let mut pairs: Vec<(u64, u64)> = test.sequences.iter().map(|s| (s.id, s.label as u64)).collect();
    pairs.sort_unstable();
    let mut bytes = Vec::with_capacity(16 * pairs.len() + 16);
    bytes.extend_from_slice(&(test.classes as u64).to_le_bytes());
    bytes.extend_from_slice(&(test.segments as u64).to_le_bytes());
    for (id, label) in pairs {
        bytes.extend_from_slice(&id.to_le_bytes());
        bytes.extend_from_slice(&label.to_le_bytes());
    }
    digest64(&bytes)
}

/// Scores every prefix view of every test sequence and aggregates per ratio.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, test: &Dataset, exec: Exec) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let (c, k) = (test.classes, test.segments);
    let predictions = exec.map(&test.sequences, |seq| -> Result<Vec<usize>> {
        if seq.len() != k {
            return Err(Error::Mismatch(format!("sequence {} has {} segments, expected {k}", seq.id, seq.len())));
        }
        (1..=k)
            .map(|p| {
                let s = predictor.scores(&PartialView::of(seq, p)?)?;
                if s.len() != c {
                    return Err(Error::Mismatch(format!("predictor returned {} scores for {c} classes", s.len())));
                }
                Ok(argmax(&s))
            })
            .collect()
    });
    let mut confusion = vec![vec![vec![0usize; c]; c]; k];
    for (seq, preds) in test.sequences.iter().zip(predictions) {
        if seq.label >= c {
            return Err(Error::Mismatch(format!("label {} out of range for {c} classes", seq.label)));
        }
        for (p, pred) in preds?.into_iter().enumerate() {
            confusion[p][seq.label][pred] += 1;
        }
    }
    Ok(EvaluationReport::from_confusion(confusion, test_set_fingerprint(test)))
}

struct Fused<'a> {
    a: &'a ModelBundle,
    b: &'a ModelBundle,
    partner: HashMap<u64, &'a FeatureSequence>,
}

impl Predictor for Fused<'_> {
    fn scores(&self, view: &PartialView) -> Result<Vec<f64>> {
        let other = self.partner[&view.source_id];
        let sa = self.a.scores(view)?;
        let sb = self.b.scores(&PartialView::of(other, view.progress)?)?;
        fuse_scores(&sa, &sb).map(|(_, s)| s)
    }
}

/// Late fusion of two single-modality models; views are paired by sequence id.
pub fn evaluate_fused(
    a: &ModelBundle,
    b: &ModelBundle,
    test_a: &Dataset,
    test_b: &Dataset,
    exec: Exec,
) -> Result<EvaluationReport> {
    if test_a.len() != test_b.len() {
        return Err(Error::Mismatch(format!(
            "paired test sets differ in size: {} vs {}",
            test_a.len(),
            test_b.len()
        )));
    }
    let partner: HashMap<u64, &FeatureSequence> = test_b.sequences.iter().map(|s| (s.id, s)).collect();
    if partner.len() != test_b.len() {
        return Err(Error::Mismatch("duplicate ids in the second test set".into()));
    }
    for s in &test_a.sequences {
        match partner.get(&s.id) {
            None => return Err(Error::Mismatch(format!("sequence {} has no partner", s.id))),
            Some(o) if o.label != s.label => {
                return Err(Error::Mismatch(format!("sequence {} labelled {} and {}", s.id, s.label, o.label)))
            }
            Some(_) => {}
        }
    }
    evaluate(&Fused { a, b, partner }, test_a, exec)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("spearman", &[x.len()], &[y.len()]));
    }
    if x.len() < 2 {
        return Err(Error::Empty("spearman needs at least two points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Modality;
    use crate::tensor::Tensor;

    struct Oracle;
    impl Predictor for Oracle {
        fn scores(&self, v: &PartialView) -> Result<Vec<f64>> {
            let mut s = vec![0.0; 8];
            s[v.label] = 1.0;
            Ok(s)
        }
    }

    /// Pseudo-random label from a hash of (id, progress).
    struct Coin;
    impl Predictor for Coin {
        fn scores(&self, v: &PartialView) -> Result<Vec<f64>> {
            let h = crate::rng::derive_seed(v.source_id, 0xC0, v.progress as u64);
            let mut s = vec![0.0; 8];
            s[(h % 8) as usize] = 1.0;
            Ok(s)
        }
    }

    fn dataset(n: usize, classes: usize, k: usize) -> Dataset {
        Dataset {
            classes,
            segments: k,
            d_raw: 2,
            seed: 0,
            sequences: (0..n)
                .map(|i| FeatureSequence {
                    id: i as u64,
                    label: i % classes,
                    modality: Modality::A,
                    segments: Tensor::zeros(&[k, 2]),
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_predictor() {
        let r = evaluate(&Oracle, &dataset(40, 8, 10), Exec::Sequential).unwrap();
        assert!(r.accuracy.iter().all(|&a| a == 1.0));
        for m in &r.confusion {
            for (i, row) in m.iter().enumerate() {
                assert_eq!(row.iter().sum::<usize>(), row[i]);
            }
        }
    }

    #[test]
    fn random_predictor_near_chance() {
        let r = evaluate(&Coin, &dataset(800, 8, 10), Exec::Parallel).unwrap();
        for &a in &r.accuracy {
            assert!((a - 0.125).abs() <= 0.035, "{a}");
        }
    }

    #[test]
    fn hand_counted_fixture() {
        // K=1, four sequences with labels 0,1,0,1; Coin-free fixed predictions.
        struct Fixed;
        impl Predictor for Fixed {
            fn scores(&self, v: &PartialView) -> Result<Vec<f64>> {
                Ok(match v.source_id {
                    0 => vec![1.0, 0.0], // label 0 -> 0
                    1 => vec![1.0, 0.0], // label 1 -> 0
                    2 => vec![0.0, 1.0], // label 0 -> 1
                    _ => vec![0.0, 1.0], // label 1 -> 1
                })
            }
        }
        let r = evaluate(&Fixed, &dataset(4, 2, 1), Exec::Sequential).unwrap();
        assert_eq!(r.confusion[0], vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(r.accuracy, vec![0.5]);
        assert_eq!(r.per_class[0], vec![Some(0.5)]);
    }

    #[test]
    fn order_invariant() {
        let mut d = dataset(50, 8, 10);
        let a = evaluate(&Coin, &d, Exec::Sequential).unwrap();
        d.sequences.reverse();
        let b = evaluate(&Coin, &d, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // ties: ranks (1, 2.5, 2.5) vs (1, 2, 3)
        let rho = spearman(&[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((rho - 0.8660254037844386).abs() < 1e-12, "{rho}");
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }
}
