//! SGD with momentum and Adam. Weight decay is L2 added to the gradient.

use serde::{Deserialize, Serialize};

use super::param::Parameter;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Sgd {
    /// `v <- mu v + g + wd w; w <- w - lr v`
    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        for p in params {
            let Parameter { value, grad, state } = p;
            let v = state.velocity.data_mut();
            for ((w, g), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(v) {
                *vi = self.momentum * *vi + g + self.weight_decay * *w;
                *w -= self.lr * *vi;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter>) {
        for p in params {
            let Parameter { value, grad, state } = p;
            state.step += 1;
            let t = state.step as i32;
            let bc1 = 1.0 - self.beta1.powi(t);
            let bc2 = 1.0 - self.beta2.powi(t);
            let m = state.first_moment.data_mut();
            let v = state.second_moment.data_mut();
            for (((w, g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                let g = g + self.weight_decay * *w;
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
