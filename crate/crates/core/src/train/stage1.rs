use std::time::Instant;

use super::config::TrainConfig;
use super::log::{Stage, TrainLog, TrainRecord};
use super::sampler::EpochSampler;
use crate::data::{Dataset, FeatureSequence};
use crate::diffcore::{cross_entropy, softmax_cross_entropy_grad, GradMode, Module, Parameter};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::ModelBundle;
use crate::rng::stream;
use crate::tensor::argmax;

const STAGE1_TAG: u64 = 0x5701;

/// Accuracy of the perceptual head on complete-sequence features.
pub fn full_sequence_accuracy(bundle: &ModelBundle, sequences: &[FeatureSequence], exec: Exec) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::Empty("sequences"));
    }
    let hits = exec.map(sequences, |s| -> Result<bool> {
        let z = bundle.full_video_feature(&s.segments)?;
        Ok(argmax(&bundle.perceptual.scores_row(&z)) == s.label)
    });
    let mut n = 0usize;
    for h in hits {
        n += h? as usize;
    }
    Ok(n as f64 / sequences.len() as f64)
}

fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; classes];
    y[label] = 1.0;
    y
}

/// Cross-entropy pre-training of encoder and perceptual head on complete
/// sequences, with SGD and the configured step schedule.
pub fn stage1_pretrain(bundle: &mut ModelBundle, train: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.segments != bundle.dims.segments || train.d_raw != bundle.dims.d_raw || train.classes != bundle.dims.classes {
        return Err(Error::Mismatch(format!(
            "dataset (C={}, K={}, d_raw={}) does not match model {:?}",
            train.classes, train.segments, train.d_raw, bundle.dims
        )));
    }
    let start = Instant::now();
    let classes = bundle.dims.classes;
    let mut log = TrainLog::default();
    let mut sampler = EpochSampler::new(train.len(), stream(cfg.seed, STAGE1_TAG, 0))?;
    let iterations = cfg.stage1.iterations;
    for it in 1..=iterations {
        let sgd = cfg.sgd_at(it);
        let batch = sampler.next_batch(cfg.batch);
        bundle.generator.encoder.zero_grad();
        bundle.perceptual.zero_grad();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in &batch {
            let seq = &train.sequences[i];
            let enc = bundle.generator.encode(&seq.segments)?;
            let (pc, s) = bundle.perceptual.forward_row(enc.last_pooled());
            loss += cross_entropy(&one_hot(seq.label, classes), &s)? * scale;
            let mut dlogits = softmax_cross_entropy_grad(&s, seq.label);
            dlogits.iter_mut().for_each(|g| *g *= scale);
            let dz = bundle.perceptual.backward_logits(&pc, &dlogits, GradMode::Accumulate);
            let k = enc.len();
            let d = dz.len();
            let mut d_pooled = vec![vec![0.0; d]; k];
            d_pooled[k - 1] = dz;
            bundle
                .generator
                .encoder_backward(&enc, vec![vec![0.0; d]; k], &d_pooled, GradMode::Accumulate);
        }
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("pre-training loss is {loss} at iteration {it}")));
        }
        let params: Vec<&mut Parameter> = bundle
            .generator
            .encoder
            .params_mut()
            .into_iter()
            .chain(bundle.perceptual.params_mut())
            .collect();
        sgd.step(params);
        let eval = it == iterations || (cfg.log_every > 0 && it % cfg.log_every == 0);
        let train_acc = if eval {
            Some(full_sequence_accuracy(bundle, &train.sequences, Exec::default())?)
        } else {
            None
        };
        log.push(TrainRecord {
            stage: Stage::Pretrain,
            iter: it,
            lr: sgd.lr,
            loss_cls: loss,
            loss_d: None,
            loss_g_adv: None,
            loss_g_total: None,
            d_real: None,
            d_fake: None,
            train_acc,
        });
    }
    log.wall_clock = start.elapsed();
    Ok(log)
}
