//! Minimal numeric core: layers with hand-derived backward passes, losses,
//! optimizers, and a finite-difference gradient checker.
//!
//! There is no tape. Every layer exposes a forward pass that returns whatever
//! it needs to remember, and a backward pass that consumes it, accumulates
//! parameter gradients, and returns the gradient with respect to its input.

pub mod activation;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod lstm;
pub mod mlp;
pub mod optim;
pub mod param;

pub use activation::{activation_backward, activation_forward, sigmoid, softmax_in_place, Activation};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use linear::{linear_forward, Linear};
pub use loss::{
    cross_entropy, cross_entropy_grad, discriminator_loss, discriminator_loss_grads, gan_losses,
    generator_adversarial_grad, generator_adversarial_loss, softmax_cross_entropy_grad, AdversarialForm,
    PROB_EPSILON,
};
pub use lstm::{lstm_cell_forward, LstmCell, LstmStack, LstmStepCache, LstmTrace};
pub use mlp::{Mlp, MlpCache};
pub use optim::{Adam, Sgd};
pub use param::{GradMode, Module, OptimState, Parameter};
pub(crate) use param::prefixed;
