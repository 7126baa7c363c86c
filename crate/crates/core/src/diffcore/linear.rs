use rand::Rng;

use super::param::{GradMode, Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Tensor};

/// `y = x W + b` with `W` stored as `d_in x d_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

/// Batched affine map over the rows of `x`.
pub fn linear_forward(x: &Tensor, weight: &Parameter, bias: &Parameter) -> Result<Tensor> {
    let w = &weight.value;
    if x.ndim() != 2 || w.ndim() != 2 || x.cols() != w.shape()[0] {
        return Err(Error::shape("linear_forward", x.shape(), w.shape()));
    }
    if bias.value.len() != w.shape()[1] {
        return Err(Error::shape("linear_forward(bias)", w.shape(), bias.value.shape()));
    }
    let mut out = x.matmul(w)?;
    let b = bias.value.data();
    for i in 0..out.rows() {
        axpy(1.0, b, out.row_mut(i));
    }
    Ok(out)
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Linear {
            weight: Parameter::glorot(&[d_in, d_out], rng),
            bias: Parameter::zeros(&[d_out]),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Parameter::zeros(&[d_in, d_out]),
            bias: Parameter::zeros(&[d_out]),
        }
    }

    pub fn from_values(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.ndim() != 2 || bias.len() != weight.shape()[1] {
            return Err(Error::shape("Linear::from_values", weight.shape(), bias.shape()));
        }
        Ok(Linear {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
        })
    }

    pub fn d_in(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        linear_forward(x, &self.weight, &self.bias)
    }

    /// Batched backward. Returns `dL/dx`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor, mode: GradMode) -> Result<Tensor> {
        if x.rows() != dy.rows() || x.cols() != self.d_in() || dy.cols() != self.d_out() {
            return Err(Error::shape("Linear::backward", x.shape(), dy.shape()));
        }
        let mut dx = Tensor::zeros(&[x.rows(), self.d_in()]);
        for i in 0..x.rows() {
            let g = self.backward_row(x.row(i), dy.row(i), mode);
            dx.row_mut(i).copy_from_slice(&g);
        }
        Ok(dx)
    }

    /// Single-row forward on raw slices; panics on mismatched lengths.
    pub fn forward_row(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d_in(), "Linear::forward_row input width");
        let d_out = self.d_out();
        let mut y = self.bias.value.data().to_vec();
        let w = self.weight.value.data();
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(xk, &w[k * d_out..(k + 1) * d_out], &mut y);
            }
        }
        y
    }

    pub fn backward_row(&mut self, x: &[f64], dy: &[f64], mode: GradMode) -> Vec<f64> {
        let d_out = self.d_out();
        let w = self.weight.value.data();
        let dx: Vec<f64> = (0..x.len())
            .map(|k| dot(&w[k * d_out..(k + 1) * d_out], dy))
            .collect();
        if mode == GradMode::Accumulate {
            let gw = self.weight.grad.data_mut();
            for (k, &xk) in x.iter().enumerate() {
                if xk != 0.0 {
                    axpy(xk, dy, &mut gw[k * d_out..(k + 1) * d_out]);
                }
            }
            axpy(1.0, dy, self.bias.grad.data_mut());
        }
        dx
    }
}

impl Module for Linear {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}
