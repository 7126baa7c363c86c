use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tensor::Tensor;

/// Optimizer slots carried alongside each parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    /// SGD momentum buffer.
    pub velocity: Tensor,
    /// Adam first moment.
    pub first_moment: Tensor,
    /// Adam second moment.
    pub second_moment: Tensor,
    /// Number of Adam updates applied so far.
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub state: OptimState,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Parameter {
            grad: zeros.clone(),
            state: OptimState {
                velocity: zeros.clone(),
                first_moment: zeros.clone(),
                second_moment: zeros,
                step: 0,
            },
            value,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Parameter::new(Tensor::zeros(shape))
    }

    /// Glorot-uniform initialisation over the tensor's two trailing dimensions.
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let fan_in = shape[0] as f64;
        let fan_out = *shape.last().unwrap() as f64;
        let a = (6.0 / (fan_in + fan_out)).sqrt();
        let mut value = Tensor::zeros(shape);
        for v in value.data_mut() {
            *v = rng.gen_range(-a..a);
        }
        Parameter::new(value)
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Whether a backward pass should accumulate into parameter gradients or
/// only propagate to its input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradMode {
    Accumulate,
    InputOnly,
}

/// Anything that owns parameters. Ordering of both methods must agree.
pub trait Module {
    fn named_params(&self) -> Vec<(String, &Parameter)>;

    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, p) in self.named_params() {
            out.extend_from_slice(p.value.data());
        }
        out
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, p) in self.named_params() {
            out.extend_from_slice(p.grad.data());
        }
        out
    }

    /// Overwrites all parameter values from a flat buffer laid out as
    /// [`Module::flat_values`] produces it.
    fn set_flat_values(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.len();
            p.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat buffer length does not match parameters");
    }

    /// Digest of every parameter name and value bit pattern.
    fn checksum(&self) -> u64 {
        let mut h = Sha256::new();
        for (name, p) in self.named_params() {
            h.update(name.as_bytes());
            for v in p.value.data() {
                h.update(v.to_le_bytes());
            }
        }
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    params: Vec<(String, &'a Parameter)>,
) -> Vec<(String, &'a Parameter)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}
