use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// Softmax over each row of a matrix (a vector is treated as one row).
    SoftmaxRows,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn activation_forward(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(f64::tanh),
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::SoftmaxRows => {
            let mut y = x.clone();
            let cols = y.cols();
            if cols > 0 {
                for row in y.data_mut().chunks_mut(cols) {
                    softmax_in_place(row);
                }
            }
            y
        }
    }
}

/// Gradient through an activation, expressed in terms of its output `y`.
pub fn activation_backward(y: &Tensor, dy: &Tensor, kind: Activation) -> Result<Tensor> {
    if y.shape() != dy.shape() {
        return Err(Error::shape("activation_backward", y.shape(), dy.shape()));
    }
    let mut dx = dy.clone();
    match kind {
        Activation::Sigmoid => {
            for (d, &s) in dx.data_mut().iter_mut().zip(y.data()) {
                *d *= s * (1.0 - s);
            }
        }
        Activation::Tanh => {
            for (d, &t) in dx.data_mut().iter_mut().zip(y.data()) {
                *d *= 1.0 - t * t;
            }
        }
        Activation::Relu => {
            for (d, &r) in dx.data_mut().iter_mut().zip(y.data()) {
                if r <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        Activation::SoftmaxRows => {
            let cols = y.cols();
            for ((d, s), g) in dx
                .data_mut()
                .chunks_mut(cols)
                .zip(y.data().chunks(cols))
                .zip(dy.data().chunks(cols))
            {
                let inner: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                for j in 0..cols {
                    d[j] = s[j] * (g[j] - inner);
                }
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(30.0) < 1.0 && sigmoid(-30.0) > 0.0);
    }

    #[test]
    fn softmax_uniform_on_zeros() {
        let x = Tensor::from_rows(&[[0.0; 4]]).unwrap();
        let y = activation_forward(&x, Activation::SoftmaxRows);
        assert_eq!(y.data(), &[0.25; 4]);
    }

    #[test]
    fn tanh_matches_exp_identity() {
        // tanh x = (e^{2x} - 1) / (e^{2x} + 1)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = activation_forward(&Tensor::vector(data.clone()), Activation::Tanh);
        for (x, t) in data.iter().zip(y.data()) {
            let e = (2.0 * x).exp();
            assert!((t - (e - 1.0) / (e + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..40).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let y = activation_forward(&Tensor::new(vec![5, 8], data).unwrap(), Activation::SoftmaxRows);
        for row in y.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
