//! Synthetic feature sequences, partial views, and dataset files.

mod io;
mod synth;

pub use io::{decode_dataset, encode_dataset, export_text, load_dataset, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use synth::{synthesize, synthesize_modality, OnsetRange, SynthSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Two-stream stand-in: two noisy renderings of one latent sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    A,
    B,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::A => 0,
            Modality::B => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Modality::A),
            1 => Some(Modality::B),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Modality::A => "a",
            Modality::B => "b",
        }
    }
}

/// One complete sequence: `K` raw segment vectors and its class.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub id: u64,
    pub label: usize,
    pub modality: Modality,
    /// `K x d_raw`
    pub segments: Tensor,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.segments.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.rows() == 0
    }
}

/// The first `progress` segments of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialView {
    pub source_id: u64,
    pub progress: usize,
    pub total: usize,
    /// `progress x d_raw`
    pub segments: Tensor,
    pub label: usize,
}

impl PartialView {
    pub fn of(seq: &FeatureSequence, progress: usize) -> Result<Self> {
        let total = seq.len();
        if progress == 0 || progress > total {
            return Err(Error::Config(format!("progress level {progress} outside [1, {total}]")));
        }
        Ok(PartialView {
            source_id: seq.id,
            progress,
            total,
            segments: seq.segments.head_rows(progress),
            label: seq.label,
        })
    }

    /// Observation ratio `k / K`.
    pub fn ratio(&self) -> f64 {
        self.progress as f64 / self.total as f64
    }
}

/// A set of sequences sharing class count, segment count and raw width.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub segments: usize,
    pub d_raw: usize,
    pub seed: u64,
    pub sequences: Vec<FeatureSequence>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.sequences.iter().map(|s| s.label).collect()
    }
}

/// Every prefix of every sequence, ordered by (sequence, progress):
/// `N` sequences become `N * K` views.
pub fn expand_views(sequences: &[FeatureSequence]) -> Result<Vec<PartialView>> {
    let Some(first) = sequences.first() else {
        return Ok(Vec::new());
    };
    let k = first.len();
    let mut out = Vec::with_capacity(sequences.len() * k);
    for seq in sequences {
        if seq.len() != k {
            return Err(Error::Mismatch(format!(
                "sequence {} has {} segments, expected {k}",
                seq.id,
                seq.len()
            )));
        }
        for p in 1..=k {
            out.push(PartialView::of(seq, p)?);
        }
    }
    Ok(out)
}
