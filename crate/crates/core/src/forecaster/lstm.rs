//! Two-layer LSTM regressor with backpropagation through time.
//!
//! Gate blocks are stacked `[input, forget, cell, output]` along the first
//! axis of every weight matrix:
//!
//! ```text
//! a = W_ih x_t + W_hh h_{t-1} + b
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const INPUT_SIZE: usize = 2;
pub const HIDDEN_1: usize = 32;
pub const HIDDEN_2: usize = 16;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        let x: &[f64; 4] = x.try_into().expect("chunk of four");
        let y: &[f64; 4] = y.try_into().expect("chunk of four");
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input: usize,
    pub hidden: usize,
    /// `[4 * hidden][input]`, row-major.
    pub w_ih: Vec<f64>,
    /// `[4 * hidden][hidden]`, row-major.
    pub w_hh: Vec<f64>,
    /// `[4 * hidden]`.
    pub b: Vec<f64>,
}

/// Per-timestep activations needed by the backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w_ih: vec![0.0; 4 * hidden * input],
            w_hh: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform(-k, k) with `k = 1/sqrt(input + hidden)`; forget-gate bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / ((input + hidden) as f64).sqrt();
        let mut l = Self::zeros(input, hidden);
        for v in l
            .w_ih
            .iter_mut()
            .chain(l.w_hh.iter_mut())
            .chain(l.b.iter_mut())
        {
            *v = rng.gen_range(-k..k);
        }
        l.b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        l
    }

    /// Runs the layer over a sequence from zero state. Returns the hidden
    /// state at every step plus the caches for [`Self::backward`].
    fn forward(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<StepCache>) {
        let hd = self.hidden;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut hs = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        let mut a = vec![0.0; 4 * hd];
        for x in xs {
            for (r, ar) in a.iter_mut().enumerate() {
                let wi = &self.w_ih[r * self.input..(r + 1) * self.input];
                let wh = &self.w_hh[r * hd..(r + 1) * hd];
                *ar = self.b[r] + dot(wi, x) + dot(wh, &h);
            }
            let i: Vec<f64> = a[..hd].iter().map(|&v| sigmoid(v)).collect();
            let f: Vec<f64> = a[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
            let g: Vec<f64> = a[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
            let o: Vec<f64> = a[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
            let c_new: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
            caches.push(StepCache {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new),
                i,
                f,
                g,
                o,
                tanh_c,
            });
            hs.push(h_new);
        }
        (hs, caches)
    }

    /// Hidden states only; no caches, no per-step allocation beyond the
    /// output rows.
    fn run(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hd = self.hidden;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut a = vec![0.0; 4 * hd];
        let mut hs = Vec::with_capacity(xs.len());
        for x in xs {
            for (r, ar) in a.iter_mut().enumerate() {
                let wi = &self.w_ih[r * self.input..(r + 1) * self.input];
                let wh = &self.w_hh[r * hd..(r + 1) * hd];
                *ar = self.b[r] + dot(wi, x) + dot(wh, &h);
            }
            for k in 0..hd {
                let i = sigmoid(a[k]);
                let f = sigmoid(a[hd + k]);
                let g = a[2 * hd + k].tanh();
                let o = sigmoid(a[3 * hd + k]);
                c[k] = f * c[k] + i * g;
                h[k] = o * c[k].tanh();
            }
            hs.push(h.clone());
        }
        hs
    }

    /// BPTT. `dh_out[t]` is the gradient flowing into `h_t` from above.
    /// Accumulates parameter gradients into `grad` and returns `dL/dx_t`.
    fn backward(
        &self,
        caches: &[StepCache],
        dh_out: &[Vec<f64>],
        grad: &mut LstmLayer,
    ) -> Vec<Vec<f64>> {
        let hd = self.hidden;
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dxs = vec![vec![0.0; self.input]; caches.len()];
        let mut da = vec![0.0; 4 * hd];
        for t in (0..caches.len()).rev() {
            let s = &caches[t];
            for k in 0..hd {
                let dh = dh_out[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dc_next[k] + dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                let di = dc * s.g[k];
                let dg = dc * s.i[k];
                let df = dc * s.c_prev[k];
                dc_next[k] = dc * s.f[k];
                da[k] = di * s.i[k] * (1.0 - s.i[k]);
                da[hd + k] = df * s.f[k] * (1.0 - s.f[k]);
                da[2 * hd + k] = dg * (1.0 - s.g[k] * s.g[k]);
                da[3 * hd + k] = d_o * s.o[k] * (1.0 - s.o[k]);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let dx = &mut dxs[t];
            for (r, &g) in da.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.b[r] += g;
                let wi = r * self.input;
                for j in 0..self.input {
                    grad.w_ih[wi + j] += g * s.x[j];
                    dx[j] += g * self.w_ih[wi + j];
                }
                let wh = r * hd;
                for j in 0..hd {
                    grad.w_hh[wh + j] += g * s.h_prev[j];
                    dh_next[j] += g * self.w_hh[wh + j];
                }
            }
        }
        dxs
    }
}

/// Layer 1 (2 -> 32), layer 2 (32 -> 16), dense head (16 -> 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layer1: LstmLayer,
    pub layer2: LstmLayer,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

impl LstmParams {
    pub fn zeros() -> Self {
        Self {
            layer1: LstmLayer::zeros(INPUT_SIZE, HIDDEN_1),
            layer2: LstmLayer::zeros(HIDDEN_1, HIDDEN_2),
            head_w: vec![0.0; HIDDEN_2],
            head_b: 0.0,
        }
    }

    pub fn init<R: Rng>(rng: &mut R) -> Self {
        let layer1 = LstmLayer::init(INPUT_SIZE, HIDDEN_1, rng);
        let layer2 = LstmLayer::init(HIDDEN_1, HIDDEN_2, rng);
        let k = 1.0 / (HIDDEN_2 as f64).sqrt();
        let head_w = (0..HIDDEN_2).map(|_| rng.gen_range(-k..k)).collect();
        let head_b = rng.gen_range(-k..k);
        Self {
            layer1,
            layer2,
            head_w,
            head_b,
        }
    }

    /// Mutable views of every parameter tensor in archive order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.layer1.w_ih,
            &mut self.layer1.w_hh,
            &mut self.layer1.b,
            &mut self.layer2.w_ih,
            &mut self.layer2.w_hh,
            &mut self.layer2.b,
            &mut self.head_w,
            std::slice::from_mut(&mut self.head_b),
        ]
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.layer1.w_ih,
            &self.layer1.w_hh,
            &self.layer1.b,
            &self.layer2.w_ih,
            &self.layer2.w_hh,
            &self.layer2.b,
            &self.head_w,
            std::slice::from_ref(&self.head_b),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn add_scaled(&mut self, other: &LstmParams, s: f64) {
        let src: Vec<Vec<f64>> = other.tensors().iter().map(|t| t.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            dst.iter_mut().zip(src).for_each(|(d, v)| *d += s * v);
        }
    }

    /// Output for an already standardized sequence.
    pub fn predict_std(&self, xs: &[Vec<f64>]) -> f64 {
        self.predict_from_h1(&self.layer1.run(xs))
    }

    /// Output given layer-1 hidden states, for callers that hold layer 1
    /// fixed.
    pub fn predict_from_h1(&self, h1: &[Vec<f64>]) -> f64 {
        let h2 = self.layer2.run(h1);
        let last = h2.last().expect("non-empty sequence");
        self.head_b + dot(&self.head_w, last)
    }

    pub fn layer1_states(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.layer1.run(xs)
    }

    /// Squared error against a standardized target.
    pub fn loss_std(&self, xs: &[Vec<f64>], target: f64) -> f64 {
        let d = self.predict_std(xs) - target;
        d * d
    }

    /// Squared-error loss and its gradient for one standardized sequence.
    pub fn loss_grad(&self, xs: &[Vec<f64>], target: f64) -> (f64, LstmParams) {
        let (h1, c1) = self.layer1.forward(xs);
        let (h2, c2) = self.layer2.forward(&h1);
        let last = h2.last().expect("non-empty sequence");
        let y = self.head_b + dot(&self.head_w, last);
        let d = y - target;
        let dy = 2.0 * d;

        let mut grad = LstmParams::zeros();
        grad.head_b = dy;
        for k in 0..HIDDEN_2 {
            grad.head_w[k] = dy * last[k];
        }
        let steps = xs.len();
        let mut dh2 = vec![vec![0.0; HIDDEN_2]; steps];
        for k in 0..HIDDEN_2 {
            dh2[steps - 1][k] = dy * self.head_w[k];
        }
        let dh1 = self.layer2.backward(&c2, &dh2, &mut grad.layer2);
        self.layer1.backward(&c1, &dh1, &mut grad.layer1);
        (d * d, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Textbook single-cell evaluation, written independently of
    /// `LstmLayer::forward`.
    fn reference_run(l: &LstmLayer, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = l.hidden;
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        for x in xs {
            let gate = |blk: usize, k: usize, h: &[f64]| {
                let r = blk * n + k;
                let mut s = l.b[r];
                for j in 0..l.input {
                    s += l.w_ih[r * l.input + j] * x[j];
                }
                for j in 0..n {
                    s += l.w_hh[r * n + j] * h[j];
                }
                s
            };
            let mut h_new = vec![0.0; n];
            for k in 0..n {
                let i = 1.0 / (1.0 + (-gate(0, k, &h)).exp());
                let f = 1.0 / (1.0 + (-gate(1, k, &h)).exp());
                let g = gate(2, k, &h).tanh();
                let o = 1.0 / (1.0 + (-gate(3, k, &h)).exp());
                c[k] = f * c[k] + i * g;
                h_new[k] = o * c[k].tanh();
            }
            h = h_new;
        }
        h
    }

    #[test]
    fn forward_matches_reference_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = LstmParams::init(&mut rng);
        p.scale(0.5);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![0.3, -0.7]).collect();
        let h1 = reference_run(&p.layer1, &xs);
        let seq1: Vec<Vec<f64>> = (1..=20)
            .map(|t| reference_run(&p.layer1, &xs[..t]))
            .collect();
        assert_eq!(seq1.last().unwrap(), &h1);
        let h2 = reference_run(&p.layer2, &seq1);
        let expected = p.head_b + p.head_w.iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>();
        assert!((p.predict_std(&xs) - expected).abs() < 1e-12);
        // the cached training pass agrees with the lean one
        let (loss, _) = p.loss_grad(&xs, 0.4);
        assert_eq!(loss, p.loss_std(&xs, 0.4));
        assert_eq!(p.predict_from_h1(&p.layer1_states(&xs)), p.predict_std(&xs));
    }

    #[test]
    fn zero_params_output_bias() {
        let mut p = LstmParams::zeros();
        p.head_b = -0.25;
        let xs: Vec<Vec<f64>> = (0..20).map(|t| vec![t as f64, 1.0]).collect();
        assert_eq!(p.predict_std(&xs), -0.25);
    }

    #[test]
    fn parameter_count() {
        let p = LstmParams::zeros();
        assert_eq!(p.num_params(), 4 * 32 * 35 + 4 * 16 * 49 + 17);
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::init(&mut rng);
        assert!(p.layer1.b[32..64].iter().all(|&b| b == 1.0));
        assert!(p.layer2.b[16..32].iter().all(|&b| b == 1.0));
    }
}
