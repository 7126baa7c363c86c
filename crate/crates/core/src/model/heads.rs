use rand::Rng;

use crate::diffcore::{prefixed, sigmoid, softmax_in_place, GradMode, Mlp, MlpCache, Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Two hidden ReLU layers and a single sigmoid unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorNet {
    pub mlp: Mlp,
}

impl DiscriminatorNet {
    pub fn new<R: Rng + ?Sized>(d_feat: usize, widths: [usize; 2], rng: &mut R) -> Self {
        DiscriminatorNet {
            mlp: Mlp::new(&[d_feat, widths[0], widths[1], 1], rng),
        }
    }

    pub fn zeros(d_feat: usize, widths: [usize; 2]) -> Self {
        DiscriminatorNet {
            mlp: Mlp::zeros(&[d_feat, widths[0], widths[1], 1]),
        }
    }

    /// Probability that `feat` is a complete-sequence feature.
    pub fn forward_row(&self, feat: &[f64]) -> (MlpCache, f64) {
        let cache = self.mlp.forward_row(feat);
        let p = sigmoid(cache.output[0]);
        (cache, p)
    }

    pub fn prob_row(&self, feat: &[f64]) -> f64 {
        self.forward_row(feat).1
    }

    /// Backward from `dL/dp`; returns `dL/d feat`.
    pub fn backward_row(&mut self, cache: &MlpCache, p: f64, dp: f64, mode: GradMode) -> Vec<f64> {
        self.mlp.backward_row(cache, &[dp * p * (1.0 - p)], mode)
    }

    pub fn discriminate(&self, feat: &Tensor) -> Result<Tensor> {
        if feat.ndim() != 2 || feat.cols() != self.mlp.d_in() {
            return Err(Error::shape("discriminate", feat.shape(), &[feat.rows(), self.mlp.d_in()]));
        }
        Ok(Tensor::vector(feat.iter_rows().map(|r| self.prob_row(r)).collect()))
    }
}

impl Module for DiscriminatorNet {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        prefixed("mlp", self.mlp.named_params())
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.mlp.params_mut()
    }
}

/// Two hidden ReLU layers and a softmax over the classes.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualNet {
    pub mlp: Mlp,
}

impl PerceptualNet {
    pub fn new<R: Rng + ?Sized>(d_feat: usize, widths: [usize; 2], classes: usize, rng: &mut R) -> Self {
        PerceptualNet {
            mlp: Mlp::new(&[d_feat, widths[0], widths[1], classes], rng),
        }
    }

    pub fn zeros(d_feat: usize, widths: [usize; 2], classes: usize) -> Self {
        PerceptualNet {
            mlp: Mlp::zeros(&[d_feat, widths[0], widths[1], classes]),
        }
    }

    pub fn classes(&self) -> usize {
        self.mlp.d_out()
    }

    /// Returns the cache and the softmax scores.
    pub fn forward_row(&self, feat: &[f64]) -> (MlpCache, Vec<f64>) {
        let cache = self.mlp.forward_row(feat);
        let mut s = cache.output.clone();
        softmax_in_place(&mut s);
        (cache, s)
    }

    pub fn scores_row(&self, feat: &[f64]) -> Vec<f64> {
        self.forward_row(feat).1
    }

    /// Backward from `dL/d logits`; returns `dL/d feat`.
    pub fn backward_logits(&mut self, cache: &MlpCache, d_logits: &[f64], mode: GradMode) -> Vec<f64> {
        self.mlp.backward_row(cache, d_logits, mode)
    }

    pub fn classify(&self, feat: &Tensor) -> Result<Tensor> {
        if feat.ndim() != 2 || feat.cols() != self.mlp.d_in() {
            return Err(Error::shape("classify", feat.shape(), &[feat.rows(), self.mlp.d_in()]));
        }
        let rows: Vec<Vec<f64>> = feat.iter_rows().map(|r| self.scores_row(r)).collect();
        Tensor::from_rows(&rows)
    }
}

impl Module for PerceptualNet {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        prefixed("mlp", self.mlp.named_params())
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.mlp.params_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::activation_forward;
    use crate::diffcore::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn feats(rows: usize, cols: usize, seed: u64) -> Tensor {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn composed(mlp: &Mlp, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for (i, l) in mlp.layers.iter().enumerate() {
            h = l.forward(&h).unwrap();
            if i + 1 < mlp.layers.len() {
                h = activation_forward(&h, Activation::Relu);
            }
        }
        h
    }

    #[test]
    fn zero_discriminator_is_indifferent() {
        let d = DiscriminatorNet::zeros(4, [5, 3]);
        let p = d.discriminate(&feats(6, 4, 1)).unwrap();
        assert!(p.data().iter().all(|v| *v == 0.5));
    }

    #[test]
    fn scaled_discriminator_saturates() {
        let mut d = DiscriminatorNet::zeros(1, [1, 1]);
        for l in &mut d.mlp.layers {
            l.weight.value.data_mut()[0] = 1.0;
        }
        let x = Tensor::from_rows(&[[0.5]]).unwrap();
        let mut last = 0.5;
        for scale in [1.0, 4.0, 16.0] {
            let mut ds = d.clone();
            for l in &mut ds.mlp.layers {
                l.weight.value.data_mut()[0] = scale;
            }
            let p = ds.discriminate(&x).unwrap().data()[0];
            assert!(p > last);
            last = p;
        }
        assert!(last > 1.0 - 1e-9);
    }

    #[test]
    fn discriminator_matches_composed_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = DiscriminatorNet::new(4, [6, 5], &mut rng);
        let x = feats(3, 4, 3);
        let p = d.discriminate(&x).unwrap();
        let logits = composed(&d.mlp, &x);
        let expect = activation_forward(&logits, Activation::Sigmoid);
        assert!(p.data().iter().zip(expect.data()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_perceptual_is_uniform() {
        let p = PerceptualNet::zeros(4, [5, 3], 6);
        let s = p.classify(&feats(2, 4, 4)).unwrap();
        assert!(s.data().iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn logit_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PerceptualNet::new(4, [6, 5], 3, &mut rng);
        let mut shifted = p.clone();
        for b in shifted.mlp.layers.last_mut().unwrap().bias.value.data_mut() {
            *b += 7.5;
        }
        let x = feats(4, 4, 6);
        let a = p.classify(&x).unwrap();
        let b = shifted.classify(&x).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn perceptual_matches_composed_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = PerceptualNet::new(4, [6, 5], 3, &mut rng);
        let x = feats(5, 4, 8);
        let s = p.classify(&x).unwrap();
        let expect = activation_forward(&composed(&p.mlp, &x), Activation::SoftmaxRows);
        assert!(s.max_abs_diff(&expect) < 1e-12);
        for row in s.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = PerceptualNet::zeros(4, [5, 3], 6);
        assert!(matches!(p.classify(&Tensor::zeros(&[2, 3])), Err(Error::Shape { .. })));
        let d = DiscriminatorNet::zeros(4, [5, 3]);
        assert!(matches!(d.discriminate(&Tensor::zeros(&[2, 5])), Err(Error::Shape { .. })));
    }
}
