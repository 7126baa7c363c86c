use rand::Rng;

use super::bundle::Variant;
use crate::diffcore::{prefixed, GradMode, Linear, LstmStack, LstmTrace, Mlp, MlpCache, Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{axpy, Tensor};

/// Prefix means of the rows of `f`: row `i` is the mean of rows `0..=i`.
pub fn sequential_context_pool(f: &Tensor) -> Tensor {
    let rows: Vec<&[f64]> = f.iter_rows().collect();
    Tensor::from_rows(&pool_rows(&rows)).expect("rows share a width")
}

fn pool_rows<V: AsRef<[f64]>>(rows: &[V]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len());
    let mut sum = vec![0.0; rows.first().map_or(0, |r| r.as_ref().len())];
    for (i, r) in rows.iter().enumerate() {
        axpy(1.0, r.as_ref(), &mut sum);
        let inv = 1.0 / (i + 1) as f64;
        out.push(sum.iter().map(|s| s * inv).collect());
    }
    out
}

/// Adjoint of prefix-mean pooling: `df_j = sum_{i >= j} dm_i / i`.
pub fn pool_backward(d_pooled: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = d_pooled.len();
    let width = d_pooled.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; width];
    let mut out = vec![Vec::new(); n];
    for i in (0..n).rev() {
        axpy(1.0 / (i + 1) as f64, &d_pooled[i], &mut acc);
        out[i] = acc.clone();
    }
    out
}

/// Encoded and pooled segments of one (partial) sequence.
#[derive(Clone, Debug)]
pub struct EncodedSegments {
    caches: Vec<MlpCache>,
    pub features: Vec<Vec<f64>>,
    pub pooled: Vec<Vec<f64>>,
}

impl EncodedSegments {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn last_pooled(&self) -> &[f64] {
        self.pooled.last().unwrap()
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorCache {
    pub encoded: EncodedSegments,
    trace: Option<LstmTrace>,
    pub output: Vec<f64>,
}

/// Segment encoder, two-layer LSTM, and residual projection.
///
/// The variant decides the wiring:
/// - `Scp`: `m_k`
/// - `Lstm`: `proj(LSTM(f_1..f_k))`
/// - `LstmScp`: `proj(LSTM(m_1..m_k))`
/// - `Full`: `m_k + proj(LSTM(m_1..m_k))`
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    pub encoder: Mlp,
    pub lstm: LstmStack,
    pub residual: Linear,
    pub variant: Variant,
}

impl GeneratorNet {
    pub fn new<R: Rng + ?Sized>(
        d_raw: usize,
        d_enc: usize,
        d_feat: usize,
        d_hidden: usize,
        variant: Variant,
        enc_rng: &mut R,
        lstm_rng: &mut R,
        res_rng: &mut R,
    ) -> Self {
        GeneratorNet {
            encoder: Mlp::new(&[d_raw, d_enc, d_feat], enc_rng),
            lstm: LstmStack::new(&[d_feat, d_hidden, d_feat], lstm_rng),
            residual: Linear::new(d_feat, d_feat, res_rng),
            variant,
        }
    }

    pub fn zeros(d_raw: usize, d_enc: usize, d_feat: usize, d_hidden: usize, variant: Variant) -> Self {
        GeneratorNet {
            encoder: Mlp::zeros(&[d_raw, d_enc, d_feat]),
            lstm: LstmStack::zeros(&[d_feat, d_hidden, d_feat]),
            residual: Linear::zeros(d_feat, d_feat),
            variant,
        }
    }

    pub fn d_raw(&self) -> usize {
        self.encoder.d_in()
    }

    pub fn d_feat(&self) -> usize {
        self.encoder.d_out()
    }

    /// Maps every row of `raw` to its segment feature `f_i`.
    pub fn encode_segments(&self, raw: &Tensor) -> Result<Tensor> {
        let enc = self.encode(raw)?;
        Tensor::from_rows(&enc.features)
    }

    pub fn encode(&self, raw: &Tensor) -> Result<EncodedSegments> {
        if raw.is_empty() || raw.rows() == 0 {
            return Err(Error::Empty("segments to encode"));
        }
        if raw.ndim() != 2 || raw.cols() != self.d_raw() {
            return Err(Error::shape("encode_segments", raw.shape(), &[raw.rows(), self.d_raw()]));
        }
        let caches: Vec<MlpCache> = raw.iter_rows().map(|r| self.encoder.forward_row(r)).collect();
        let features: Vec<Vec<f64>> = caches.iter().map(|c| c.output.clone()).collect();
        let pooled = pool_rows(&features);
        Ok(EncodedSegments {
            caches,
            features,
            pooled,
        })
    }

    /// The enhanced feature for the given observed segments.
    pub fn generate(&self, raw: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(raw)?.output)
    }

    pub fn forward(&self, raw: &Tensor) -> Result<GeneratorCache> {
        let encoded = self.encode(raw)?;
        let (trace, output) = match self.variant {
            Variant::Scp => (None, encoded.last_pooled().to_vec()),
            Variant::Lstm | Variant::LstmScp | Variant::Full => {
                let inputs = if self.variant == Variant::Lstm {
                    &encoded.features
                } else {
                    &encoded.pooled
                };
                let trace = self.lstm.forward(inputs);
                let mut out = self.residual.forward_row(trace.last_output());
                if self.variant == Variant::Full {
                    axpy(1.0, encoded.last_pooled(), &mut out);
                }
                (Some(trace), out)
            }
        };
        Ok(GeneratorCache {
            encoded,
            trace,
            output,
        })
    }

    /// Backward from `dL/d output`. Recurrent and projection weights always
    /// accumulate. With `encoder = Some(mode)` the gradient continues through
    /// the encoder and `dL/d raw` is returned.
    pub fn backward(&mut self, cache: &GeneratorCache, d_out: &[f64], encoder: Option<GradMode>) -> Option<Tensor> {
        let k = cache.encoded.len();
        let d = self.d_feat();
        let mut d_feat = vec![vec![0.0; d]; k];
        let mut d_pool = vec![vec![0.0; d]; k];
        if matches!(self.variant, Variant::Scp | Variant::Full) {
            axpy(1.0, d_out, &mut d_pool[k - 1]);
        }
        if let Some(trace) = &cache.trace {
            let dh = self.residual.backward_row(trace.last_output(), d_out, GradMode::Accumulate);
            let dx = self.lstm.backward_last(trace, &dh, GradMode::Accumulate);
            let target = if self.variant == Variant::Lstm { &mut d_feat } else { &mut d_pool };
            for (t, g) in target.iter_mut().zip(&dx) {
                axpy(1.0, g, t);
            }
        }
        let mode = encoder?;
        Some(self.encoder_backward(&cache.encoded, d_feat, &d_pool, mode))
    }

    /// Backward through pooling and the encoder, returning `dL/d raw`.
    pub fn encoder_backward(
        &mut self,
        encoded: &EncodedSegments,
        mut d_features: Vec<Vec<f64>>,
        d_pooled: &[Vec<f64>],
        mode: GradMode,
    ) -> Tensor {
        for (df, dp) in d_features.iter_mut().zip(pool_backward(d_pooled)) {
            axpy(1.0, &dp, df);
        }
        let rows: Vec<Vec<f64>> = encoded
            .caches
            .iter()
            .zip(&d_features)
            .map(|(c, g)| self.encoder.backward_row(c, g, mode))
            .collect();
        Tensor::from_rows(&rows).expect("rows share a width")
    }

    pub fn uses_recurrence(&self) -> bool {
        self.variant != Variant::Scp
    }

    /// Parameters on this variant's inference path, excluding the encoder.
    pub fn path_params_mut(&mut self) -> Vec<&mut Parameter> {
        if self.uses_recurrence() {
            let mut v = self.lstm.params_mut();
            v.extend(self.residual.params_mut());
            v
        } else {
            Vec::new()
        }
    }

    /// Path parameters, preceded by the encoder's when `with_encoder` is set.
    pub fn trainable_params_mut(&mut self, with_encoder: bool) -> Vec<&mut Parameter> {
        let recurrent = self.uses_recurrence();
        let mut v = Vec::new();
        if with_encoder {
            v.extend(self.encoder.params_mut());
        }
        if recurrent {
            v.extend(self.lstm.params_mut());
            v.extend(self.residual.params_mut());
        }
        v
    }
}

impl Module for GeneratorNet {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        let mut v = prefixed("encoder", self.encoder.named_params());
        v.extend(prefixed("lstm", self.lstm.named_params()));
        v.extend(prefixed("residual", self.residual.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = self.encoder.params_mut();
        v.extend(self.lstm.params_mut());
        v.extend(self.residual.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_gen(variant: Variant, seed: u64) -> GeneratorNet {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed + 1);
        let mut r3 = ChaCha8Rng::seed_from_u64(seed + 2);
        GeneratorNet::new(5, 6, 4, 3, variant, &mut r, &mut r2, &mut r3)
    }

    #[test]
    fn pool_single_row_is_identity() {
        let f = Tensor::from_rows(&[[3.0, -1.0]]).unwrap();
        assert_eq!(sequential_context_pool(&f), f);
    }

    #[test]
    fn pool_two_rows_is_mean() {
        let f = Tensor::from_rows(&[[2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(sequential_context_pool(&f).row(1), &[1.0, 1.0]);
    }

    #[test]
    fn pool_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_tensor(10, 8, &mut rng);
        let m = sequential_context_pool(&f);
        for i in 0..10 {
            for c in 0..8 {
                let mut s = 0.0;
                for j in 0..=i {
                    s += f.row(j)[c];
                }
                assert!((m.row(i)[c] - s / (i + 1) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_encoder_passes_input_through() {
        // relu(x) - relu(-x) = x, so [I, -I] then [I; -I] is an exact identity.
        let d = 3;
        let mut g = GeneratorNet::zeros(d, 2 * d, d, 2, Variant::Full);
        for i in 0..d {
            let w0 = g.encoder.layers[0].weight.value.data_mut();
            w0[i * 2 * d + i] = 1.0;
            w0[i * 2 * d + d + i] = -1.0;
            let w1 = g.encoder.layers[1].weight.value.data_mut();
            w1[i * d + i] = 1.0;
            w1[(d + i) * d + i] = -1.0;
        }
        let raw = Tensor::from_rows(&[[0.5, -2.0, 1.5], [-0.1, 0.0, 4.0]]).unwrap();
        assert_eq!(g.encode_segments(&raw).unwrap(), raw);
    }

    #[test]
    fn zero_encoder_outputs_bias() {
        let mut g = GeneratorNet::zeros(3, 4, 2, 2, Variant::Scp);
        g.encoder.layers[1].bias.value.data_mut().copy_from_slice(&[0.25, -1.0]);
        let raw = Tensor::from_rows(&[[1.0, 2.0, 3.0], [9.0, -9.0, 0.0]]).unwrap();
        let f = g.encode_segments(&raw).unwrap();
        for row in f.iter_rows() {
            assert_eq!(row, &[0.25, -1.0]);
        }
    }

    #[test]
    fn encoder_matches_composed_layers() {
        let g = random_gen(Variant::Full, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = random_tensor(4, 5, &mut rng);
        let f = g.encode_segments(&raw).unwrap();
        let h = g.encoder.layers[0].forward(&raw).unwrap().map(|v| v.max(0.0));
        let expect = g.encoder.layers[1].forward(&h).unwrap();
        assert!(f.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        let g = random_gen(Variant::Full, 3);
        assert!(matches!(g.encode_segments(&Tensor::zeros(&[0, 5])), Err(Error::Empty(_))));
    }

    #[test]
    fn zero_residual_gives_pooled_feature() {
        let mut g = random_gen(Variant::Full, 5);
        g.residual = Linear::zeros(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let raw = random_tensor(3, 5, &mut rng);
        let out = g.generate(&raw).unwrap();
        let m = sequential_context_pool(&g.encode_segments(&raw).unwrap());
        assert_eq!(out, m.row(2));
    }

    #[test]
    fn full_output_matches_cell_chain() {
        let g = random_gen(Variant::Full, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw = random_tensor(3, 5, &mut rng);
        let m = sequential_context_pool(&g.encode_segments(&raw).unwrap());
        let (l0, l1) = (&g.lstm.layers[0], &g.lstm.layers[1]);
        let (mut h0, mut c0) = (vec![0.0; 3], vec![0.0; 3]);
        let (mut h1, mut c1) = (vec![0.0; 4], vec![0.0; 4]);
        for t in 0..3 {
            let s0 = l0.forward_step(m.row(t), &h0, &c0);
            h0 = s0.h;
            c0 = s0.c;
            let s1 = l1.forward_step(&h0, &h1, &c1);
            h1 = s1.h;
            c1 = s1.c;
        }
        let r = g.residual.forward_row(&h1);
        let out = g.generate(&raw).unwrap();
        for j in 0..4 {
            assert!((out[j] - (m.row(2)[j] + r[j])).abs() < 1e-12);
        }
    }
}
