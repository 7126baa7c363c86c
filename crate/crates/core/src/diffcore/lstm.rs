//! Standard LSTM cell (no peepholes) and a stacked, unrolled sequence model
//! trained with backpropagation through time.
//!
//! Gate pre-activations are laid out `[input | forget | candidate | output]`,
//! each block `hidden` wide.

use rand::Rng;

use super::activation::sigmoid;
use super::param::{prefixed, GradMode, Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, Tensor};

pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell {
    /// `d_in x 4h`
    pub w_input: Parameter,
    /// `h x 4h`
    pub w_hidden: Parameter,
    /// `4h`
    pub bias: Parameter,
}

/// Everything one step needs for its backward pass.
#[derive(Clone, Debug)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, same layout as the pre-activations.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Parameter::zeros(&[4 * hidden]);
        bias.value.data_mut()[hidden..2 * hidden].fill(FORGET_BIAS_INIT);
        LstmCell {
            w_input: Parameter::glorot(&[d_in, 4 * hidden], rng),
            w_hidden: Parameter::glorot(&[hidden, 4 * hidden], rng),
            bias,
        }
    }

    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        LstmCell {
            w_input: Parameter::zeros(&[d_in, 4 * hidden]),
            w_hidden: Parameter::zeros(&[hidden, 4 * hidden]),
            bias: Parameter::zeros(&[4 * hidden]),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_input.value.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.value.shape()[0]
    }

    pub fn forward_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStepCache {
        let h = self.hidden();
        assert_eq!(x.len(), self.d_in(), "LstmCell input width");
        assert_eq!(h_prev.len(), h, "LstmCell hidden width");
        let four = 4 * h;
        let mut z = self.bias.value.data().to_vec();
        let wx = self.w_input.value.data();
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(xk, &wx[k * four..(k + 1) * four], &mut z);
            }
        }
        let wh = self.w_hidden.value.data();
        for (k, &hk) in h_prev.iter().enumerate() {
            if hk != 0.0 {
                axpy(hk, &wh[k * four..(k + 1) * four], &mut z);
            }
        }
        for (j, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&j) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            hn[j] = o * tanh_c[j];
        }
        LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates: z,
            tanh_c,
            h: hn,
            c,
        }
    }

    /// Given `dL/dh_t` and `dL/dc_t` (from the future), returns
    /// `(dL/dx_t, dL/dh_{t-1}, dL/dc_{t-1})`.
    pub fn backward_step(
        &mut self,
        cache: &LstmStepCache,
        dh: &[f64],
        dc_next: &[f64],
        mode: GradMode,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden();
        let four = 4 * h;
        let z = &cache.gates;
        let mut dz = vec![0.0; four];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            let d_f = dc * cache.c_prev[j];
            let d_i = dc * g;
            let d_g = dc * i;
            dc_prev[j] = dc * f;
            dz[j] = d_i * i * (1.0 - i);
            dz[h + j] = d_f * f * (1.0 - f);
            dz[2 * h + j] = d_g * (1.0 - g * g);
            dz[3 * h + j] = d_o * o * (1.0 - o);
        }
        let wx = self.w_input.value.data();
        let dx: Vec<f64> = (0..cache.x.len())
            .map(|k| dot(&wx[k * four..(k + 1) * four], &dz))
            .collect();
        let wh = self.w_hidden.value.data();
        let dh_prev: Vec<f64> = (0..h)
            .map(|k| dot(&wh[k * four..(k + 1) * four], &dz))
            .collect();
        if mode == GradMode::Accumulate {
            let gx = self.w_input.grad.data_mut();
            for (k, &xk) in cache.x.iter().enumerate() {
                if xk != 0.0 {
                    axpy(xk, &dz, &mut gx[k * four..(k + 1) * four]);
                }
            }
            let gh = self.w_hidden.grad.data_mut();
            for (k, &hk) in cache.h_prev.iter().enumerate() {
                if hk != 0.0 {
                    axpy(hk, &dz, &mut gh[k * four..(k + 1) * four]);
                }
            }
            axpy(1.0, &dz, self.bias.grad.data_mut());
        }
        (dx, dh_prev, dc_prev)
    }
}

/// Batched single step over the rows of `x_t`.
pub fn lstm_cell_forward(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    cell: &LstmCell,
) -> Result<(Tensor, Tensor)> {
    let hd = cell.hidden();
    if x_t.cols() != cell.d_in() {
        return Err(Error::shape("lstm_cell_forward(x)", x_t.shape(), cell.w_input.value.shape()));
    }
    if h_prev.cols() != hd || c_prev.cols() != hd || h_prev.rows() != x_t.rows() || c_prev.rows() != x_t.rows() {
        return Err(Error::shape("lstm_cell_forward(state)", h_prev.shape(), c_prev.shape()));
    }
    let n = x_t.rows();
    let mut h = Tensor::zeros(&[n, hd]);
    let mut c = Tensor::zeros(&[n, hd]);
    for r in 0..n {
        let step = cell.forward_step(x_t.row(r), h_prev.row(r), c_prev.row(r));
        h.row_mut(r).copy_from_slice(&step.h);
        c.row_mut(r).copy_from_slice(&step.c);
    }
    Ok((h, c))
}

impl Module for LstmCell {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_hidden".into(), &self.w_hidden),
            ("bias".into(), &self.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

/// Stacked LSTM unrolled from a zero state.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmCell>,
}

/// Per-layer, per-timestep caches of one unrolled forward pass.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    steps: Vec<Vec<LstmStepCache>>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps[0].is_empty()
    }

    /// Top-layer hidden state at step `t`.
    pub fn output(&self, t: usize) -> &[f64] {
        &self.steps.last().unwrap()[t].h
    }

    pub fn last_output(&self) -> &[f64] {
        self.output(self.len() - 1)
    }
}

impl LstmStack {
    /// `widths = [d_in, h_1, ..., h_L]`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        LstmStack {
            layers: widths.windows(2).map(|w| LstmCell::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        LstmStack {
            layers: widths.windows(2).map(|w| LstmCell::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().unwrap().hidden()
    }

    pub fn forward<V: AsRef<[f64]>>(&self, xs: &[V]) -> LstmTrace {
        assert!(!xs.is_empty(), "LstmStack::forward on empty sequence");
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut inputs: Vec<Vec<f64>> = xs.iter().map(|x| x.as_ref().to_vec()).collect();
        for cell in &self.layers {
            let hd = cell.hidden();
            let mut h = vec![0.0; hd];
            let mut c = vec![0.0; hd];
            let mut layer_steps = Vec::with_capacity(inputs.len());
            for x in &inputs {
                let s = cell.forward_step(x, &h, &c);
                h.clone_from(&s.h);
                c.clone_from(&s.c);
                layer_steps.push(s);
            }
            inputs = layer_steps.iter().map(|s| s.h.clone()).collect();
            steps.push(layer_steps);
        }
        LstmTrace { steps }
    }

    /// BPTT. `d_top[t]` is `dL/dh_t` of the top layer (zeros where the loss
    /// does not read that step). Returns `dL/dx_t` for every step.
    pub fn backward(&mut self, trace: &LstmTrace, d_top: &[Vec<f64>], mode: GradMode) -> Vec<Vec<f64>> {
        let t_len = trace.len();
        assert_eq!(d_top.len(), t_len);
        let mut d_out: Vec<Vec<f64>> = d_top.to_vec();
        for (l, cell) in self.layers.iter_mut().enumerate().rev() {
            let hd = cell.hidden();
            let mut dh_next = vec![0.0; hd];
            let mut dc_next = vec![0.0; hd];
            let mut d_in = vec![Vec::new(); t_len];
            for t in (0..t_len).rev() {
                let mut dh = d_out[t].clone();
                axpy(1.0, &dh_next, &mut dh);
                let (dx, dh_prev, dc_prev) = cell.backward_step(&trace.steps[l][t], &dh, &dc_next, mode);
                d_in[t] = dx;
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
            d_out = d_in;
        }
        d_out
    }

    /// Convenience: backward when only the final top-layer state feeds the loss.
    pub fn backward_last(&mut self, trace: &LstmTrace, d_last: &[f64], mode: GradMode) -> Vec<Vec<f64>> {
        let hd = self.d_out();
        let mut d_top = vec![vec![0.0; hd]; trace.len()];
        d_top[trace.len() - 1] = d_last.to_vec();
        self.backward(trace, &d_top, mode)
    }
}

impl Module for LstmStack {
    fn named_params(&self) -> Vec<(String, &Parameter)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, c)| prefixed(&format!("layers.{i}"), c.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Scalar re-implementation reading weights element by element.
    fn scalar_step(cell: &LstmCell, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = cell.hidden();
        let wx = &cell.w_input.value;
        let wh = &cell.w_hidden.value;
        let b = cell.bias.value.data();
        let pre = |gate: usize, j: usize| {
            let col = gate * hd + j;
            let mut acc = b[col];
            for k in 0..x.len() {
                acc += x[k] * wx.data()[k * 4 * hd + col];
            }
            for k in 0..hd {
                acc += h[k] * wh.data()[k * 4 * hd + col];
            }
            acc
        };
        let mut hn = vec![0.0; hd];
        let mut cn = vec![0.0; hd];
        for j in 0..hd {
            let i = sig(pre(0, j));
            let f = sig(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sig(pre(3, j));
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn zero_cell_gives_zero_state() {
        let cell = LstmCell::zeros(3, 4);
        let s = cell.forward_step(&[1.0, -2.0, 5.0], &[0.0; 4], &[0.0; 4]);
        assert!(s.h.iter().all(|v| *v == 0.0));
        assert!(s.c.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let mut cell = LstmCell::zeros(2, 3);
        let b = cell.bias.value.data_mut();
        b[0..3].fill(-100.0);
        b[3..6].fill(100.0);
        b[9..12].fill(-100.0);
        let c_prev = [0.3, -0.7, 1.2];
        let s = cell.forward_step(&[0.5, 0.5], &[0.1, 0.2, 0.3], &c_prev);
        for j in 0..3 {
            assert!((s.c[j] - c_prev[j]).abs() < 1e-8);
            assert!(s.h[j].abs() < 1e-8);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cell = LstmCell::new(3, 4, &mut rng);
        for v in cell.bias.value.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = cell.forward_step(&x, &h, &c);
        let (ho, co) = scalar_step(&cell, &x, &h, &c);
        for j in 0..4 {
            assert!((s.h[j] - ho[j]).abs() < 1e-12);
            assert!((s.c[j] - co[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stack_maps_any_sequence_to_zero() {
        let stack = LstmStack::zeros(&[3, 5, 3]);
        let xs = vec![vec![1.0, 2.0, 3.0], vec![-4.0, 0.5, 9.0], vec![7.0, 7.0, 7.0]];
        let tr = stack.forward(&xs);
        for t in 0..3 {
            assert!(tr.output(t).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn batched_cell_shape_errors() {
        let cell = LstmCell::zeros(3, 2);
        let r = lstm_cell_forward(&Tensor::zeros(&[1, 4]), &Tensor::zeros(&[1, 2]), &Tensor::zeros(&[1, 2]), &cell);
        assert!(matches!(r, Err(Error::Shape { .. })));
    }
}
