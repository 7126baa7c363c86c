use rand::Rng;

use super::linear::Linear;
use super::param::{prefixed, GradMode, Module, Parameter};

/// Stack of affine layers with ReLU between them and no activation after the
/// last one; heads apply their own output nonlinearity to the logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Clone, Debug)]
pub struct MlpCache {
    /// Input seen by each layer (post-ReLU for every layer but the first).
    inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// `widths` lists every layer boundary, input first.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2);
        Mlp {
            layers: widths.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Mlp {
            layers: widths.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().unwrap().d_out()
    }

    pub fn forward_row(&self, x: &[f64]) -> MlpCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward_row(&h);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            inputs.push(h);
            h = y;
        }
        MlpCache { inputs, output: h }
    }

    pub fn output_row(&self, x: &[f64]) -> Vec<f64> {
        self.forward_row(x).output
    }

    pub fn backward_row(&mut self, cache: &MlpCache, d_out: &[f64], mode: GradMode) -> Vec<f64> {
        let mut g = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                // ReLU mask from the activated output, which is the next layer's input.
                for (gj, &a) in g.iter_mut().zip(&cache.inputs[i + 1]) {
                    if a <= 0.0 {
                        *gj = 0.0;
                    }
                }
            }
            g = self.layers[i].backward_row(&cache.inputs[i], &g, mode);
        }
        g
    }
}

impl Module for Mlp {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layers.{i}"), l.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}
