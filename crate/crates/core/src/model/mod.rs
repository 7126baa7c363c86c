//! The networks: segment encoder, sequential residual generator,
//! discriminator, perceptual head, and the ablation variants that reroute
//! the generator.

mod bundle;
pub mod checkpoint;
mod generator;
mod heads;

pub use bundle::{fuse_scores, predict, ModelBundle, ModelDims, Variant};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use generator::{pool_backward, sequential_context_pool, EncodedSegments, GeneratorCache, GeneratorNet};
pub use heads::{DiscriminatorNet, PerceptualNet};
