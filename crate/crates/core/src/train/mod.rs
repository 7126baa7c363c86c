//! Two-stage optimisation: supervised pre-training on complete sequences,
//! then alternating generator / discriminator updates on partial views.

mod config;
mod log;
mod sampler;
mod stage1;
mod stage2;

pub use config::{StageOneConfig, StageTwoConfig, TrainConfig};
pub use log::{Stage, TrainLog, TrainRecord};
pub use sampler::{Batch, BatchSampler, EpochSampler};
pub use stage1::{full_sequence_accuracy, stage1_pretrain};
pub use stage2::{discriminator_gap, stage2_adversarial, stage2_with, view_accuracy, DiscriminatorGap, Stage2Options};
