//! Class-conditional synthetic sequences.
//!
//! Each sequence has a latent trajectory built from
//! - a nuisance offset `b` shared by all of its segments, drawn per
//!   recording subject (training and test sets use disjoint subjects) or,
//!   with `subjects = 0`, per sequence,
//! - a class-independent prototype `S_i` per segment (the ambiguous part).
//!   With `mimicry = 1` it is a random mix of class prototypes, so an
//!   early prefix looks like a blend of other classes,
//! - a class prototype `P_c`,
//!
//! and an onset `o`. Before the onset segment `i` is
//! `b + alpha S_i + (1 - alpha) P_c`; from the onset on it blends linearly,
//! over `ramp` segments, to `b + P_c`. Each modality renders the latent with
//! its own fixed signed permutation and independent Gaussian noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureSequence, Modality};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::stream;
use crate::tensor::Tensor;

/// Uniform onset segment (1-based, inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnsetRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub segments: usize,
    pub d_raw: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// 0: the pre-onset prefix is already class-pure; 1: fully shared.
    pub ambiguity: f64,
    pub onset: OnsetRange,
    /// Per-segment observation noise.
    pub noise: f64,
    /// Standard deviation of the offset.
    pub nuisance: f64,
    /// Subjects per split sharing an offset; 0 draws one per sequence.
    pub subjects: usize,
    /// Standard deviation of class-independent variation added to each
    /// segment before the onset, fading out over the ramp.
    pub jitter: f64,
    /// Segments taken to blend from the prefix to the class pattern.
    pub ramp: usize,
    /// Fraction of each shared prototype lying in the span of the class
    /// prototypes: 0 gives unrelated prefixes, 1 prefixes that look like
    /// mixtures of classes.
    pub mimicry: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 8,
            segments: 10,
            d_raw: 32,
            n_train: 200,
            n_test: 100,
            ambiguity: 1.0,
            onset: OnsetRange { min: 2, max: 6 },
            noise: 0.1,
            nuisance: 0.0,
            subjects: 0,
            jitter: 0.0,
            ramp: 2,
            mimicry: 1.0,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes < 2 {
            return bad(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.segments == 0 || self.d_raw == 0 {
            return bad("segments and d_raw must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.ambiguity) {
            return bad(format!("ambiguity must lie in [0, 1], got {}", self.ambiguity));
        }
        if !(self.noise >= 0.0) || !(self.nuisance >= 0.0) || !(self.jitter >= 0.0) {
            return bad("noise, nuisance and jitter must be non-negative".into());
        }
        if self.onset.min < 1 || self.onset.min > self.onset.max || self.onset.max > self.segments {
            return bad(format!(
                "onset range [{}, {}] must lie within [1, {}]",
                self.onset.min, self.onset.max, self.segments
            ));
        }
        if !(0.0..=1.0).contains(&self.mimicry) {
            return bad(format!("mimicry must lie in [0, 1], got {}", self.mimicry));
        }
        if self.ramp == 0 {
            return bad("ramp must be >= 1".into());
        }
        Ok(())
    }
}

const PROTO_TAG: u64 = 0xA11;
const LATENT_TAG: u64 = 0xB22;
const NOISE_TAG: u64 = 0xC33;
const SUBJECT_TAG: u64 = 0xD44;

struct Prototypes {
    shared: Vec<Vec<f64>>,
    class: Vec<Vec<f64>>,
    /// Signed permutation applied by modality B: `out[j] = sign[j] * x[perm[j]]`.
    perm: Vec<usize>,
    sign: Vec<f64>,
}

fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn prototypes(spec: &SynthSpec) -> Prototypes {
    let mut rng = stream(spec.seed, PROTO_TAG, 0);
    let own: Vec<Vec<f64>> = (0..spec.segments).map(|_| gaussian_vec(&mut rng, spec.d_raw)).collect();
    let class: Vec<Vec<f64>> = (0..spec.classes).map(|_| gaussian_vec(&mut rng, spec.d_raw)).collect();
    let mut mix_rng = stream(spec.seed, PROTO_TAG, 1);
    let (mu, scale) = (spec.mimicry, 1.0 / (spec.classes as f64).sqrt());
    let shared = own
        .iter()
        .map(|o| {
            let coef = gaussian_vec(&mut mix_rng, spec.classes);
            (0..spec.d_raw)
                .map(|j| {
                    let mixed: f64 = coef.iter().zip(&class).map(|(a, p)| a * p[j]).sum::<f64>() * scale;
                    (1.0 - mu * mu).sqrt() * o[j] + mu * mixed
                })
                .collect()
        })
        .collect();
    let mut perm: Vec<usize> = (0..spec.d_raw).collect();
    perm.shuffle(&mut rng);
    let sign = (0..spec.d_raw).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    Prototypes {
        shared,
        class,
        perm,
        sign,
    }
}

/// Latent (noise-free) trajectory and label of sequence `global_index`.
fn latent(spec: &SynthSpec, protos: &Prototypes, global_index: u64) -> (usize, Vec<Vec<f64>>) {
    let mut rng = stream(spec.seed, LATENT_TAG, global_index);
    let label = rng.gen_range(0..spec.classes);
    let onset = rng.gen_range(spec.onset.min..=spec.onset.max);
    let offset = Normal::new(0.0, spec.nuisance).expect("validated nuisance");
    let b: Vec<f64> = if spec.subjects == 0 {
        (0..spec.d_raw).map(|_| offset.sample(&mut rng)).collect()
    } else {
        let split = if global_index < spec.n_train as u64 { 0 } else { spec.subjects };
        let subject = split + rng.gen_range(0..spec.subjects);
        let mut srng = stream(spec.seed, SUBJECT_TAG, subject as u64);
        (0..spec.d_raw).map(|_| offset.sample(&mut srng)).collect()
    };
    let a = spec.ambiguity;
    let pc = &protos.class[label];
    let jit = Normal::new(0.0, spec.jitter).expect("validated jitter");
    let traj = (1..=spec.segments)
        .map(|i| {
            let w = if i < onset {
                0.0
            } else {
                ((i - onset + 1) as f64 / spec.ramp as f64).min(1.0)
            };
            let s = &protos.shared[i - 1];
            (0..spec.d_raw)
                .map(|j| {
                    let prefix = a * s[j] + (1.0 - a) * pc[j] + jit.sample(&mut rng);
                    b[j] + (1.0 - w) * prefix + w * pc[j]
                })
                .collect()
        })
        .collect();
    (label, traj)
}

fn render(spec: &SynthSpec, protos: &Prototypes, global_index: u64, modality: Modality) -> FeatureSequence {
    let (label, traj) = latent(spec, protos, global_index);
    let mut rng = stream(spec.seed, NOISE_TAG + modality.code() as u64, global_index);
    let noise = Normal::new(0.0, spec.noise).expect("validated noise");
    let mut data = Vec::with_capacity(spec.segments * spec.d_raw);
    for seg in &traj {
        for j in 0..spec.d_raw {
            let v = match modality {
                Modality::A => seg[j],
                Modality::B => protos.sign[j] * seg[protos.perm[j]],
            };
            data.push(v + noise.sample(&mut rng));
        }
    }
    FeatureSequence {
        id: global_index,
        label,
        modality,
        segments: Tensor::new(vec![spec.segments, spec.d_raw], data).expect("sized above"),
    }
}

/// Train and test sets for one modality. Ids `0..n_train` are training
/// sequences and `n_train..n_train + n_test` test sequences; the same id in
/// the other modality renders the same latent sequence.
pub fn synthesize_modality(spec: &SynthSpec, modality: Modality, exec: Exec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let protos = prototypes(spec);
    let build = |range: std::ops::Range<u64>| {
        let ids: Vec<u64> = range.collect();
        Dataset {
            classes: spec.classes,
            segments: spec.segments,
            d_raw: spec.d_raw,
            seed: spec.seed,
            sequences: exec.map(&ids, |&id| render(spec, &protos, id, modality)),
        }
    };
    let n_train = spec.n_train as u64;
    let train = build(0..n_train);
    let test = build(n_train..n_train + spec.n_test as u64);
    Ok((train, test))
}

pub fn synthesize(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    synthesize_modality(spec, Modality::A, Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nearest(protos: &[Vec<f64>], x: &[f64]) -> usize {
        let dist = |p: &Vec<f64>| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        (0..protos.len())
            .min_by(|&a, &b| dist(&protos[a]).partial_cmp(&dist(&protos[b])).unwrap())
            .unwrap()
    }

    #[test]
    fn degenerate_spec_is_class_pure_from_the_start() {
        let spec = SynthSpec {
            ambiguity: 0.0,
            noise: 0.0,
            nuisance: 0.0,
            onset: OnsetRange { min: 1, max: 1 },
            ..SynthSpec::default()
        };
        let protos = prototypes(&spec);
        let (_, test) = synthesize(&spec).unwrap();
        for s in &test.sequences {
            assert_eq!(nearest(&protos.class, s.segments.row(0)), s.label);
        }
    }

    #[test]
    fn fully_ambiguous_prefix_carries_no_label() {
        let spec = SynthSpec {
            ambiguity: 1.0,
            nuisance: 0.0,
            noise: 0.0,
            onset: OnsetRange { min: 10, max: 10 },
            ..SynthSpec::default()
        };
        let (train, _) = synthesize(&spec).unwrap();
        let first = &train.sequences[0];
        for s in &train.sequences {
            for r in 0..9 {
                assert_eq!(s.segments.row(r), first.segments.row(r));
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = SynthSpec {
            classes: 8,
            segments: 10,
            d_raw: 32,
            noise: 0.1,
            seed: 7,
            ..SynthSpec::default()
        };
        let a = synthesize(&spec).unwrap();
        let b = synthesize_modality(&spec, Modality::A, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a.0.sequences[0].segments, c.0.sequences[0].segments);
    }

    #[test]
    fn modalities_pair_by_id_and_label() {
        let spec = SynthSpec::default();
        let (ta, _) = synthesize_modality(&spec, Modality::A, Exec::Sequential).unwrap();
        let (tb, _) = synthesize_modality(&spec, Modality::B, Exec::Sequential).unwrap();
        for (a, b) in ta.sequences.iter().zip(&tb.sequences) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            assert_eq!(b.modality, Modality::B);
            assert_ne!(a.segments, b.segments);
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = SynthSpec::default();
        for bad in [
            SynthSpec { ambiguity: 1.5, ..base },
            SynthSpec { noise: -0.1, ..base },
            SynthSpec { onset: OnsetRange { min: 0, max: 3 }, ..base },
            SynthSpec { onset: OnsetRange { min: 4, max: 11 }, ..base },
            SynthSpec { classes: 1, ..base },
        ] {
            assert!(matches!(synthesize(&bad), Err(Error::Config(_))), "{bad:?}");
        }
    }
}
