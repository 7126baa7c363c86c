//! Finite-difference checks of every hand-written backward pass, from single
//! layers up to the full generator objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diffcore::{
    activation_backward, activation_forward, cross_entropy, cross_entropy_grad, discriminator_loss,
    discriminator_loss_grads, generator_adversarial_grad, generator_adversarial_loss, grad_check,
    softmax_cross_entropy_grad, softmax_in_place, Activation, AdversarialForm, GradCheckConfig, GradCheckReport,
    GradMode, Linear, LstmCell, LstmStack, Mlp, Module,
};
use crate::model::{pool_backward, sequential_context_pool, DiscriminatorNet, GeneratorNet, PerceptualNet, Variant};
use crate::tensor::Tensor;

const D_RAW: usize = 5;
const D_ENC: usize = 6;
const D_FEAT: usize = 4;
const D_HIDDEN: usize = 6;
const HEAD: [usize; 2] = [7, 5];
const CLASSES: usize = 3;
const STEPS: usize = 10;

#[derive(Clone, Copy, Debug)]
pub struct GradSuiteConfig {
    pub check: GradCheckConfig,
    pub seed: u64,
    /// Multiplies every analytic gradient; anything but 1.0 should fail.
    pub fault: f64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        GradSuiteConfig {
            check: GradCheckConfig::default(),
            seed: 2024,
            fault: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradSuiteReport {
    pub checks: Vec<GradCheckReport>,
}

impl GradSuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            s += &format!(
                "{:<w$}  {:>5} coords  max rel err {:.3e}  {}\n",
                c.name,
                c.coords,
                c.max_rel_error,
                if c.passed { "ok" } else { "FAIL" }
            );
            if let Some(f) = &c.failure {
                s += &format!("    {f}\n");
            }
        }
        s += &format!(
            "{} checks, max rel err {:.3e}: {}\n",
            self.checks.len(),
            self.max_rel_error(),
            if self.passed() { "pass" } else { "FAIL" }
        );
        s
    }
}

fn randn(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(|c| c.to_vec()).collect()
}

struct Suite {
    cfg: GradSuiteConfig,
    rng: ChaCha8Rng,
    out: Vec<GradCheckReport>,
}

impl Suite {
    fn input<F>(&mut self, name: &str, x0: &[f64], mut f: F)
    where
        F: FnMut(&[f64]) -> (f64, Vec<f64>),
    {
        let fault = self.cfg.fault;
        let r = grad_check(
            name,
            x0,
            |x| {
                let (l, g) = f(x);
                (l, g.into_iter().map(|v| v * fault).collect())
            },
            self.cfg.check,
        );
        self.out.push(r);
    }

    /// Checks parameter gradients; `run` must zero nothing, run forward and an
    /// accumulating backward pass, and return the loss.
    fn params<M, F>(&mut self, name: &str, module: &M, mut run: F)
    where
        M: Module + Clone,
        F: FnMut(&mut M) -> f64,
    {
        let x0 = module.flat_values();
        let mut work = module.clone();
        self.input(name, &x0, |x| {
            work.set_flat_values(x);
            work.zero_grad();
            let l = run(&mut work);
            (l, work.flat_grads())
        });
    }
}

pub fn run_grad_suite(cfg: GradSuiteConfig) -> GradSuiteReport {
    let mut s = Suite {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        out: Vec::new(),
    };
    layers(&mut s);
    losses(&mut s);
    networks(&mut s);
    GradSuiteReport { checks: s.out }
}

fn layers(s: &mut Suite) {
    let rng = &mut s.rng;

    let lin = Linear::new(D_RAW, D_FEAT, rng);
    let x = randn(rng, D_RAW, 1.0);
    let u = randn(rng, D_FEAT, 1.0);
    {
        let (x, u) = (x.clone(), u.clone());
        s.params("linear.params", &lin, move |m| {
            let y = m.forward_row(&x);
            m.backward_row(&x, &u, GradMode::Accumulate);
            dot(&y, &u)
        });
    }
    {
        let mut m = lin.clone();
        let u = u.clone();
        s.input("linear.input", &x, move |x| {
            let y = m.forward_row(x);
            (dot(&y, &u), m.backward_row(x, &u, GradMode::InputOnly))
        });
    }

    for (name, kind) in [
        ("activation.sigmoid", Activation::Sigmoid),
        ("activation.tanh", Activation::Tanh),
        ("activation.relu", Activation::Relu),
        ("activation.softmax_rows", Activation::SoftmaxRows),
    ] {
        let x0 = randn(&mut s.rng, 12, 2.0);
        let u = Tensor::new(vec![3, 4], randn(&mut s.rng, 12, 1.0)).unwrap();
        s.input(name, &x0, |x| {
            let y = activation_forward(&Tensor::new(vec![3, 4], x.to_vec()).unwrap(), kind);
            let g = activation_backward(&y, &u, kind).unwrap();
            (dot(y.data(), u.data()), g.into_data())
        });
    }

    let rng = &mut s.rng;
    let cell = LstmCell::new(D_FEAT, D_HIDDEN, rng);
    let xh = randn(rng, D_FEAT + 2 * D_HIDDEN, 1.0);
    let (uh, uc) = (randn(rng, D_HIDDEN, 1.0), randn(rng, D_HIDDEN, 1.0));
    let split = |v: &[f64]| (v[..D_FEAT].to_vec(), v[D_FEAT..D_FEAT + D_HIDDEN].to_vec(), v[D_FEAT + D_HIDDEN..].to_vec());
    {
        let (x, h, c) = split(&xh);
        let (uh, uc) = (uh.clone(), uc.clone());
        s.params("lstm_cell.params", &cell, move |m| {
            let st = m.forward_step(&x, &h, &c);
            m.backward_step(&st, &uh, &uc, GradMode::Accumulate);
            dot(&st.h, &uh) + dot(&st.c, &uc)
        });
    }
    {
        let mut m = cell.clone();
        s.input("lstm_cell.inputs", &xh, move |v| {
            let (x, h, c) = split(v);
            let st = m.forward_step(&x, &h, &c);
            let (dx, dh, dc) = m.backward_step(&st, &uh, &uc, GradMode::InputOnly);
            (dot(&st.h, &uh) + dot(&st.c, &uc), [dx, dh, dc].concat())
        });
    }

    let rng = &mut s.rng;
    let stack = LstmStack::new(&[D_FEAT, D_HIDDEN, D_FEAT], rng);
    let xs = randn(rng, STEPS * D_FEAT, 1.0);
    let us = rows(&randn(rng, STEPS * D_FEAT, 1.0), D_FEAT);
    {
        let (xs, us) = (rows(&xs, D_FEAT), us.clone());
        s.params("lstm_stack.params", &stack, move |m| {
            let tr = m.forward(&xs);
            m.backward(&tr, &us, GradMode::Accumulate);
            (0..STEPS).map(|t| dot(tr.output(t), &us[t])).sum()
        });
    }
    {
        let mut m = stack.clone();
        s.input("lstm_stack.inputs", &xs, move |x| {
            let tr = m.forward(&rows(x, D_FEAT));
            let dx = m.backward(&tr, &us, GradMode::InputOnly);
            ((0..STEPS).map(|t| dot(tr.output(t), &us[t])).sum(), dx.concat())
        });
    }

    let f0 = randn(&mut s.rng, STEPS * D_FEAT, 1.0);
    let u = rows(&randn(&mut s.rng, STEPS * D_FEAT, 1.0), D_FEAT);
    s.input("sequential_context_pool", &f0, |f| {
        let m = sequential_context_pool(&Tensor::new(vec![STEPS, D_FEAT], f.to_vec()).unwrap());
        let l = m.iter_rows().zip(&u).map(|(r, w)| dot(r, w)).sum();
        (l, pool_backward(&u).concat())
    });

    let rng = &mut s.rng;
    let enc = Mlp::new(&[D_RAW, D_ENC, D_FEAT], rng);
    let x = randn(rng, D_RAW, 1.0);
    let u = randn(rng, D_FEAT, 1.0);
    {
        let (x, u) = (x.clone(), u.clone());
        s.params("encoder.params", &enc, move |m| {
            let c = m.forward_row(&x);
            m.backward_row(&c, &u, GradMode::Accumulate);
            dot(&c.output, &u)
        });
    }
    let mut m = enc.clone();
    s.input("encoder.input", &x, move |x| {
        let c = m.forward_row(x);
        (dot(&c.output, &u), m.backward_row(&c, &u, GradMode::InputOnly))
    });
}

fn losses(s: &mut Suite) {
    let mut s_probs = vec![0.5, 1.2, -0.3];
    softmax_in_place(&mut s_probs);
    let y = vec![0.0, 1.0, 0.0];
    s.input("cross_entropy", &s_probs, |p| (cross_entropy(&y, p).unwrap(), cross_entropy_grad(&y, p)));

    let logits = randn(&mut s.rng, 5, 2.0);
    s.input("softmax_cross_entropy", &logits, |z| {
        let mut p = z.to_vec();
        softmax_in_place(&mut p);
        let mut y = vec![0.0; 5];
        y[2] = 1.0;
        (cross_entropy(&y, &p).unwrap(), softmax_cross_entropy_grad(&p, 2))
    });

    let probs: Vec<f64> = (0..8).map(|_| s.rng.gen_range(0.05..0.95)).collect();
    s.input("discriminator_loss", &probs, |p| {
        let (gr, gf) = discriminator_loss_grads(&p[..4], &p[4..]);
        (discriminator_loss(&p[..4], &p[4..]).unwrap(), [gr, gf].concat())
    });
    for (name, form) in [
        ("generator_loss.non_saturating", AdversarialForm::NonSaturating),
        ("generator_loss.saturating", AdversarialForm::Saturating),
    ] {
        s.input(name, &probs[..5], |p| {
            (generator_adversarial_loss(p, form).unwrap(), generator_adversarial_grad(p, form))
        });
    }
}

fn networks(s: &mut Suite) {
    let raw = randn(&mut s.rng, STEPS * D_RAW, 1.0);
    let u = randn(&mut s.rng, D_FEAT, 1.0);
    let mut seeds = ChaCha8Rng::seed_from_u64(s.cfg.seed ^ 0x5eed);
    let mut nets = Vec::new();
    for v in Variant::ALL {
        let mut r = ChaCha8Rng::seed_from_u64(seeds.gen());
        let (mut a, mut b, mut c) = (r.clone(), r.clone(), r.clone());
        a = ChaCha8Rng::seed_from_u64(a.gen());
        b = ChaCha8Rng::seed_from_u64(b.gen::<u64>() ^ 1);
        c = ChaCha8Rng::seed_from_u64(c.gen::<u64>() ^ 2);
        let mut g = GeneratorNet::new(D_RAW, D_ENC, D_FEAT, D_HIDDEN, v, &mut a, &mut b, &mut c);
        // Non-trivial residual so the recurrent path carries real signal.
        for w in g.residual.weight.value.data_mut() {
            *w += 0.3 * r.gen_range(-1.0..1.0);
        }
        nets.push(g);
    }
    for g in &nets {
        let raw_t = Tensor::new(vec![STEPS, D_RAW], raw.clone()).unwrap();
        let u1 = u.clone();
        s.params(&format!("generator.{}.params", g.variant), g, move |m| {
            let c = m.forward(&raw_t).unwrap();
            m.backward(&c, &u1, Some(GradMode::Accumulate));
            dot(&c.output, &u1)
        });
        let mut m = g.clone();
        let u1 = u.clone();
        s.input(&format!("generator.{}.input", g.variant), &raw, move |x| {
            let c = m.forward(&Tensor::new(vec![STEPS, D_RAW], x.to_vec()).unwrap()).unwrap();
            let dx = m.backward(&c, &u1, Some(GradMode::InputOnly)).unwrap();
            (dot(&c.output, &u1), dx.into_data())
        });
    }

    let rng = &mut s.rng;
    let disc = DiscriminatorNet::new(D_FEAT, HEAD, rng);
    let feats: Vec<Vec<f64>> = (0..4).map(|_| randn(rng, D_FEAT, 1.5)).collect();
    {
        let feats = feats.clone();
        s.params("discriminator.params", &disc, move |m| {
            let outs: Vec<_> = feats.iter().map(|f| m.forward_row(f)).collect();
            let p: Vec<f64> = outs.iter().map(|o| o.1).collect();
            let (gr, gf) = discriminator_loss_grads(&p[..2], &p[2..]);
            for ((c, p), g) in outs.iter().zip(&p).zip(gr.iter().chain(&gf)) {
                m.backward_row(&c.0, *p, *g, GradMode::Accumulate);
            }
            discriminator_loss(&p[..2], &p[2..]).unwrap()
        });
    }
    {
        let mut m = disc.clone();
        s.input("discriminator.input", &feats[0], move |x| {
            let (c, p) = m.forward_row(x);
            let g = generator_adversarial_grad(&[p], AdversarialForm::NonSaturating);
            let l = generator_adversarial_loss(&[p], AdversarialForm::NonSaturating).unwrap();
            (l, m.backward_row(&c, p, g[0], GradMode::InputOnly))
        });
    }

    let rng = &mut s.rng;
    let perc = PerceptualNet::new(D_FEAT, HEAD, CLASSES, rng);
    let feat = randn(rng, D_FEAT, 1.5);
    let onehot = |l: usize| {
        let mut y = vec![0.0; CLASSES];
        y[l] = 1.0;
        y
    };
    {
        let feat = feat.clone();
        s.params("perceptual.params", &perc, move |m| {
            let (c, sc) = m.forward_row(&feat);
            m.backward_logits(&c, &softmax_cross_entropy_grad(&sc, 1), GradMode::Accumulate);
            cross_entropy(&onehot(1), &sc).unwrap()
        });
    }
    {
        let mut m = perc.clone();
        s.input("perceptual.input", &feat, move |x| {
            let (c, sc) = m.forward_row(x);
            let g = m.backward_logits(&c, &softmax_cross_entropy_grad(&sc, 1), GradMode::InputOnly);
            (cross_entropy(&onehot(1), &sc).unwrap(), g)
        });
    }

    // loss_G_adv(D(G(x))) + lambda * CE(P(G(x))) over a batch of two views,
    // checked with respect to every generator parameter.
    let lambda = 0.7;
    let full = nets.iter().find(|g| g.variant == Variant::Full).unwrap().clone();
    let views = [
        Tensor::new(vec![STEPS, D_RAW], raw.clone()).unwrap(),
        Tensor::new(vec![STEPS / 2, D_RAW], randn(&mut s.rng, STEPS / 2 * D_RAW, 1.0)).unwrap(),
    ];
    let labels = [0usize, 2];
    for form in [AdversarialForm::NonSaturating, AdversarialForm::Saturating] {
        let (mut d, mut p) = (disc.clone(), perc.clone());
        let views = views.clone();
        let name = match form {
            AdversarialForm::NonSaturating => "generator_objective.non_saturating",
            AdversarialForm::Saturating => "generator_objective.saturating",
        };
        s.params(name, &full, move |g| {
            let caches: Vec<_> = views.iter().map(|v| g.forward(v).unwrap()).collect();
            let dd: Vec<_> = caches.iter().map(|c| d.forward_row(&c.output)).collect();
            let probs: Vec<f64> = dd.iter().map(|o| o.1).collect();
            let adv = generator_adversarial_loss(&probs, form).unwrap();
            let dprobs = generator_adversarial_grad(&probs, form);
            let n = views.len() as f64;
            let mut cls = 0.0;
            for (i, c) in caches.iter().enumerate() {
                let (pc, sc) = p.forward_row(&c.output);
                cls += cross_entropy(&onehot(labels[i]), &sc).unwrap() / n;
                let mut dl = softmax_cross_entropy_grad(&sc, labels[i]);
                dl.iter_mut().for_each(|v| *v *= lambda / n);
                let mut df = p.backward_logits(&pc, &dl, GradMode::InputOnly);
                let dadv = d.backward_row(&dd[i].0, probs[i], dprobs[i], GradMode::InputOnly);
                df.iter_mut().zip(&dadv).for_each(|(a, b)| *a += b);
                g.backward(c, &df, Some(GradMode::Accumulate));
            }
            adv + lambda * cls
        });
    }
}
