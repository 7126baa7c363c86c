use std::time::Instant;

use super::config::TrainConfig;
use super::log::{Stage, TrainLog, TrainRecord};
use super::sampler::BatchSampler;
use crate::data::{expand_views, Dataset, FeatureSequence, PartialView};
use crate::diffcore::{
    cross_entropy, discriminator_loss, discriminator_loss_grads, generator_adversarial_grad,
    generator_adversarial_loss, softmax_cross_entropy_grad, GradMode, Module, Parameter,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::ModelBundle;
use crate::rng::stream;
use crate::tensor::argmax;

const STAGE2_TAG: u64 = 0x5702;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stage2Options {
    /// Skip generator updates and run only discriminator steps.
    pub freeze_generator: bool,
    /// Compare parameter digests around every update (slow; for tests).
    pub check_isolation: bool,
}

/// Mean discriminator output on complete-sequence features and on enhanced
/// partial-view features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminatorGap {
    pub d_real: f64,
    pub d_fake: f64,
}

impl DiscriminatorGap {
    pub fn gap(&self) -> f64 {
        self.d_real - self.d_fake
    }
}

pub fn discriminator_gap(bundle: &ModelBundle, views: &[PartialView], reals: &[FeatureSequence]) -> Result<DiscriminatorGap> {
    if views.is_empty() || reals.is_empty() {
        return Err(Error::Empty("discriminator gap batch"));
    }
    let exec = Exec::default();
    let fake = exec.map(views, |v| bundle.generator.generate(&v.segments).map(|g| bundle.discriminator.prob_row(&g)));
    let real = exec.map(reals, |s| bundle.full_video_feature(&s.segments).map(|z| bundle.discriminator.prob_row(&z)));
    let mean = |xs: Vec<Result<f64>>| -> Result<f64> {
        let n = xs.len() as f64;
        let mut acc = 0.0;
        for x in xs {
            acc += x?;
        }
        Ok(acc / n)
    };
    Ok(DiscriminatorGap {
        d_real: mean(real)?,
        d_fake: mean(fake)?,
    })
}

/// Fraction of views whose enhanced feature is classified correctly.
pub fn view_accuracy(bundle: &ModelBundle, views: &[PartialView], exec: Exec) -> Result<f64> {
    if views.is_empty() {
        return Err(Error::Empty("views"));
    }
    let hits = exec.map(views, |v| -> Result<bool> {
        let g = bundle.generator.generate(&v.segments)?;
        Ok(argmax(&bundle.perceptual.scores_row(&g)) == v.label)
    });
    let mut n = 0usize;
    for h in hits {
        n += h? as usize;
    }
    Ok(n as f64 / views.len() as f64)
}

fn generator_trainables<'a>(bundle: &'a mut ModelBundle, cfg: &TrainConfig) -> Vec<&'a mut Parameter> {
    let mut params = bundle.generator.trainable_params_mut(!cfg.stage2.freeze_encoder);
    if !cfg.stage2.freeze_perceptual {
        params.extend(bundle.perceptual.params_mut());
    }
    params
}

pub fn stage2_adversarial(bundle: &mut ModelBundle, train: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    stage2_with(bundle, train, cfg, Stage2Options::default())
}

/// One iteration is a generator step on `adversarial + lambda * cls`
/// followed by `d_steps` discriminator steps. Fakes are enhanced partial
/// views; reals are complete-sequence features.
pub fn stage2_with(bundle: &mut ModelBundle, train: &Dataset, cfg: &TrainConfig, opts: Stage2Options) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let start = Instant::now();
    let s2 = cfg.stage2;
    let mut views = expand_views(&train.sequences)?;
    if !s2.include_complete_views {
        views.retain(|v| v.progress < v.total);
    }
    let mut sampler = BatchSampler::new(
        views.len(),
        train.len(),
        stream(cfg.seed, STAGE2_TAG, 0),
        stream(cfg.seed, STAGE2_TAG, 1),
    )?;
    let adam = cfg.adam();
    let classes = bundle.dims.classes;
    let mut log = TrainLog::default();

    for it in 1..=s2.iterations {
        let mut loss_cls = f64::NAN;
        let mut loss_adv = None;
        let mut loss_total = None;

        if !opts.freeze_generator {
            let batch = sampler.make_batch(&views, &train.sequences, cfg.batch)?;
            let d_digest = opts.check_isolation.then(|| bundle.discriminator.checksum());
            bundle.zero_grad();
            let n = batch.fakes.len();
            let scale = 1.0 / n as f64;
            let mut caches = Vec::with_capacity(n);
            let mut probs = Vec::with_capacity(n);
            for v in &batch.fakes {
                let gc = bundle.generator.forward(&v.segments)?;
                let (dc, p) = bundle.discriminator.forward_row(&gc.output);
                let (pc, s) = bundle.perceptual.forward_row(&gc.output);
                probs.push(p);
                caches.push((gc, dc, pc, s));
            }
            let adv = generator_adversarial_loss(&probs, s2.adversarial_form)?;
            let dprobs = generator_adversarial_grad(&probs, s2.adversarial_form);
            let p_mode = if s2.freeze_perceptual { GradMode::InputOnly } else { GradMode::Accumulate };
            let enc_mode = (!s2.freeze_encoder).then_some(GradMode::Accumulate);
            let mut cls = 0.0;
            for (i, (gc, dc, pc, s)) in caches.iter().enumerate() {
                let label = batch.labels[i];
                let mut y = vec![0.0; classes];
                y[label] = 1.0;
                cls += cross_entropy(&y, s)? * scale;
                let mut dfeat = bundle.discriminator.backward_row(dc, probs[i], dprobs[i], GradMode::InputOnly);
                if s2.lambda != 0.0 {
                    let mut dlogits = softmax_cross_entropy_grad(s, label);
                    dlogits.iter_mut().for_each(|g| *g *= s2.lambda * scale);
                    let dp = bundle.perceptual.backward_logits(pc, &dlogits, p_mode);
                    dfeat.iter_mut().zip(&dp).for_each(|(a, b)| *a += b);
                }
                bundle.generator.backward(gc, &dfeat, enc_mode);
            }
            let total = adv + s2.lambda * cls;
            if !total.is_finite() {
                return Err(Error::Divergence(format!("generator objective is {total} at iteration {it}")));
            }
            adam.step(generator_trainables(bundle, cfg));
            if let Some(before) = d_digest {
                assert_eq!(before, bundle.discriminator.checksum(), "generator step touched the discriminator");
            }
            loss_cls = cls;
            loss_adv = Some(adv);
            loss_total = Some(total);
        }

        let mut loss_d = 0.0;
        let mut d_real = 0.0;
        let mut d_fake = 0.0;
        for _ in 0..s2.d_steps {
            let batch = sampler.make_batch(&views, &train.sequences, cfg.batch)?;
            let g_digest = opts
                .check_isolation
                .then(|| (bundle.generator.checksum(), bundle.perceptual.checksum()));
            bundle.discriminator.zero_grad();
            let mut fake_feats = Vec::with_capacity(batch.fakes.len());
            for v in &batch.fakes {
                fake_feats.push(bundle.generator.generate(&v.segments)?);
            }
            let mut real_feats = Vec::with_capacity(batch.reals.len());
            for s in &batch.reals {
                real_feats.push(bundle.full_video_feature(&s.segments)?);
            }
            let real: Vec<_> = real_feats.iter().map(|z| bundle.discriminator.forward_row(z)).collect();
            let fake: Vec<_> = fake_feats.iter().map(|g| bundle.discriminator.forward_row(g)).collect();
            let pr: Vec<f64> = real.iter().map(|r| r.1).collect();
            let pf: Vec<f64> = fake.iter().map(|r| r.1).collect();
            let l = discriminator_loss(&pr, &pf)?;
            if !l.is_finite() {
                return Err(Error::Divergence(format!("discriminator loss is {l} at iteration {it}")));
            }
            let (gr, gf) = discriminator_loss_grads(&pr, &pf);
            for ((c, p), g) in real.iter().zip(&pr).zip(&gr) {
                bundle.discriminator.backward_row(&c.0, *p, *g, GradMode::Accumulate);
            }
            for ((c, p), g) in fake.iter().zip(&pf).zip(&gf) {
                bundle.discriminator.backward_row(&c.0, *p, *g, GradMode::Accumulate);
            }
            adam.step(bundle.discriminator.params_mut());
            if let Some(before) = g_digest {
                let after = (bundle.generator.checksum(), bundle.perceptual.checksum());
                assert_eq!(before, after, "discriminator step touched the generator");
            }
            loss_d += l / s2.d_steps as f64;
            d_real = pr.iter().sum::<f64>() / pr.len() as f64;
            d_fake = pf.iter().sum::<f64>() / pf.len() as f64;
        }

        let eval = it == s2.iterations || (cfg.log_every > 0 && it % cfg.log_every == 0);
        let train_acc = if eval { Some(view_accuracy(bundle, &views, Exec::default())?) } else { None };
        log.push(TrainRecord {
            stage: Stage::Adversarial,
            iter: it,
            lr: s2.lr,
            loss_cls,
            loss_d: Some(loss_d),
            loss_g_adv: loss_adv,
            loss_g_total: loss_total,
            d_real: Some(d_real),
            d_fake: Some(d_fake),
            train_acc,
        });
    }
    log.wall_clock = start.elapsed();
    Ok(log)
}
