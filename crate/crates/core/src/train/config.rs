use serde::{Deserialize, Serialize};

use crate::diffcore::{Adam, AdversarialForm, Sgd};
use crate::error::{Error, Result};

/// Supervised pre-training: SGD with momentum and a step schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOneConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Multiplier applied to the learning rate every `decay_every` iterations.
    pub lr_decay: f64,
    pub decay_every: usize,
    pub iterations: usize,
}

/// Adversarial stage: Adam on generator/perceptual and on the discriminator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTwoConfig {
    pub lr: f64,
    pub weight_decay: f64,
    /// Weight of the classification term in the generator objective.
    pub lambda: f64,
    pub d_steps: usize,
    pub iterations: usize,
    pub freeze_encoder: bool,
    pub freeze_perceptual: bool,
    pub adversarial_form: AdversarialForm,
    /// Also enhance the `k = K` view (the complete sequence) as a fake.
    pub include_complete_views: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage1: StageOneConfig,
    pub stage2: StageTwoConfig,
    pub batch: usize,
    pub seed: u64,
    /// Evaluate training accuracy every this many iterations (0: only at the end).
    pub log_every: usize,
}

impl Default for StageOneConfig {
    fn default() -> Self {
        StageOneConfig {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_decay: 0.1,
            decay_every: 300,
            iterations: 1200,
        }
    }
}

impl Default for StageTwoConfig {
    fn default() -> Self {
        StageTwoConfig {
            lr: 1e-3,
            weight_decay: 5e-4,
            lambda: 1.0,
            d_steps: 3,
            iterations: 400,
            freeze_encoder: true,
            freeze_perceptual: false,
            adversarial_form: AdversarialForm::NonSaturating,
            include_complete_views: true,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage1: StageOneConfig::default(),
            stage2: StageTwoConfig::default(),
            batch: 64,
            seed: 0,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    /// Schedule for full-size data: SGD 0.001 / 0.9 / 5e-4 decayed tenfold
    /// every 4500 of 18000 iterations, then Adam at 1e-4, batch 64, lambda 1.
    pub fn paper_scale() -> Self {
        TrainConfig {
            stage1: StageOneConfig {
                lr: 0.001,
                momentum: 0.9,
                weight_decay: 5e-4,
                lr_decay: 0.1,
                decay_every: 4500,
                iterations: 18000,
            },
            stage2: StageTwoConfig {
                lr: 1e-4,
                ..StageTwoConfig::default()
            },
            batch: 64,
            seed: 0,
            log_every: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.stage1.lr >= 0.0) || !(self.stage2.lr >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.stage2.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if self.stage2.d_steps < 1 {
            return bad("d_steps must be >= 1");
        }
        if self.batch < 1 {
            return bad("batch must be >= 1");
        }
        if self.stage1.decay_every < 1 {
            return bad("decay_every must be >= 1");
        }
        Ok(())
    }

    pub fn sgd_at(&self, iteration: usize) -> Sgd {
        let s = &self.stage1;
        let drops = (iteration.saturating_sub(1) / s.decay_every) as i32;
        Sgd {
            lr: s.lr * s.lr_decay.powi(drops),
            momentum: s.momentum,
            weight_decay: s.weight_decay,
        }
    }

    pub fn adam(&self) -> Adam {
        Adam::new(self.stage2.lr, self.stage2.weight_decay)
    }
}
