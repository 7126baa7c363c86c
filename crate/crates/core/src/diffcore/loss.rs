//! Classification and adversarial losses on probabilities.
//!
//! Every `log` sees its argument clamped to at least [`PROB_EPSILON`].
//! Batch expectations are minibatch means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PROB_EPSILON: f64 = 1e-12;

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.max(PROB_EPSILON).ln()
}

#[inline]
fn clamped_ln_grad(p: f64) -> f64 {
    if p >= PROB_EPSILON {
        1.0 / p
    } else {
        0.0
    }
}

/// `-sum_i y_i log s_i`.
pub fn cross_entropy(y: &[f64], s: &[f64]) -> Result<f64> {
    if y.len() != s.len() {
        return Err(Error::shape("cross_entropy", &[y.len()], &[s.len()]));
    }
    Ok(-y
        .iter()
        .zip(s)
        .filter(|(yi, _)| **yi != 0.0)
        .map(|(yi, si)| yi * clamped_ln(*si))
        .sum::<f64>())
}

/// `dL/ds` of [`cross_entropy`].
pub fn cross_entropy_grad(y: &[f64], s: &[f64]) -> Vec<f64> {
    y.iter().zip(s).map(|(yi, si)| -yi * clamped_ln_grad(*si)).collect()
}

/// Gradient of cross-entropy with respect to the logits that produced the
/// softmax output `s`: `s - onehot(label)`. Algebraically the same as
/// chaining [`cross_entropy_grad`] through the softmax Jacobian but stays
/// well-defined when the true-class probability underflows.
pub fn softmax_cross_entropy_grad(s: &[f64], label: usize) -> Vec<f64> {
    let mut g = s.to_vec();
    g[label] -= 1.0;
    g
}

/// How the generator's adversarial term is written.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversarialForm {
    /// Minimise `-log D(g)`.
    #[default]
    NonSaturating,
    /// Minimise `log(1 - D(g))`, the literal minimax term.
    Saturating,
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Discriminator loss: `-mean log D(z) - mean log(1 - D(g))`.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::Empty("discriminator_loss batch"));
    }
    let real = -mean(d_real.iter().map(|p| clamped_ln(*p)), d_real.len());
    let fake = -mean(d_fake.iter().map(|p| clamped_ln(1.0 - p)), d_fake.len());
    Ok(real + fake)
}

/// Gradients of [`discriminator_loss`] with respect to each probability.
pub fn discriminator_loss_grads(d_real: &[f64], d_fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nr = d_real.len() as f64;
    let nf = d_fake.len() as f64;
    let gr = d_real.iter().map(|p| -clamped_ln_grad(*p) / nr).collect();
    let gf = d_fake.iter().map(|p| clamped_ln_grad(1.0 - p) / nf).collect();
    (gr, gf)
}

pub fn generator_adversarial_loss(d_fake: &[f64], form: AdversarialForm) -> Result<f64> {
    if d_fake.is_empty() {
        return Err(Error::Empty("generator_adversarial_loss batch"));
    }
    let n = d_fake.len();
    Ok(match form {
        AdversarialForm::NonSaturating => -mean(d_fake.iter().map(|p| clamped_ln(*p)), n),
        AdversarialForm::Saturating => mean(d_fake.iter().map(|p| clamped_ln(1.0 - p)), n),
    })
}

pub fn generator_adversarial_grad(d_fake: &[f64], form: AdversarialForm) -> Vec<f64> {
    let n = d_fake.len() as f64;
    match form {
        AdversarialForm::NonSaturating => d_fake.iter().map(|p| -clamped_ln_grad(*p) / n).collect(),
        AdversarialForm::Saturating => d_fake.iter().map(|p| -clamped_ln_grad(1.0 - p) / n).collect(),
    }
}

/// `(loss_D, loss_G_adv)` with the non-saturating generator term.
pub fn gan_losses(d_real: &[f64], d_fake: &[f64]) -> Result<(f64, f64)> {
    Ok((
        discriminator_loss(d_real, d_fake)?,
        generator_adversarial_loss(d_fake, AdversarialForm::NonSaturating)?,
    ))
}
