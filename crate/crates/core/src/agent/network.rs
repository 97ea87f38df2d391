//! Dueling Q-network with hand-written backpropagation.
//!
//! ```text
//! x(4) -> fc1(64) -> relu -> fc2(64) -> relu -+-> value(1)
//!                                             +-> advantage(3)
//! Q(s, a) = V(s) + A(s, a) - mean_a' A(s, a')
//! ```

use rand::Rng;

use crate::gradcheck::relative_error;
use serde::{Deserialize, Serialize};

pub const STATE_DIM: usize = 4;
pub const NUM_ACTIONS: usize = 3;

/// Fully connected layer, weights row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    pub fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let k = 1.0 / (inputs as f64).sqrt();
        let mut d = Self::zeros(inputs, outputs);
        d.w.iter_mut().for_each(|v| *v = rng.gen_range(-k..k));
        d.b.iter_mut().for_each(|v| *v = rng.gen_range(-k..k));
        d
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
                self.b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.b[o] += g;
            let base = o * self.inputs;
            for i in 0..self.inputs {
                grad.w[base + i] += g * x[i];
                dx[i] += g * self.w[base + i];
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnParams {
    pub fc1: Dense,
    pub fc2: Dense,
    pub value: Dense,
    pub advantage: Dense,
}

/// Intermediate activations kept for the backward pass.
struct Trace {
    x: [f64; STATE_DIM],
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    q: [f64; NUM_ACTIONS],
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

impl DqnParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            fc1: Dense::zeros(STATE_DIM, hidden),
            fc2: Dense::zeros(hidden, hidden),
            value: Dense::zeros(hidden, 1),
            advantage: Dense::zeros(hidden, NUM_ACTIONS),
        }
    }

    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        Self {
            fc1: Dense::init(STATE_DIM, hidden, rng),
            fc2: Dense::init(hidden, hidden, rng),
            value: Dense::init(hidden, 1, rng),
            advantage: Dense::init(hidden, NUM_ACTIONS, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fc1.outputs
    }

    /// Named views of every tensor, in a fixed order.
    pub fn layers(&self) -> [(&'static str, &Dense); 4] {
        [
            ("fc1", &self.fc1),
            ("fc2", &self.fc2),
            ("value", &self.value),
            ("advantage", &self.advantage),
        ]
    }

    pub fn layers_mut(&mut self) -> [(&'static str, &mut Dense); 4] {
        [
            ("fc1", &mut self.fc1),
            ("fc2", &mut self.fc2),
            ("value", &mut self.value),
            ("advantage", &mut self.advantage),
        ]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers()
            .iter()
            .flat_map(|(_, d)| d.w.iter().chain(d.b.iter()).copied())
            .collect()
    }

    pub fn flat_mut(&mut self) -> Vec<&mut f64> {
        let mut out = Vec::new();
        for (_, d) in self.layers_mut() {
            out.extend(d.w.iter_mut());
            out.extend(d.b.iter_mut());
        }
        out
    }

    /// The `i`-th parameter in [`Self::flat`] order.
    pub fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for (_, d) in self.layers_mut() {
            if i < d.w.len() {
                return &mut d.w[i];
            }
            i -= d.w.len();
            if i < d.b.len() {
                return &mut d.b[i];
            }
            i -= d.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn num_params(&self) -> usize {
        self.flat().len()
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|v| v.is_finite())
    }

    fn trace(&self, x: &[f64; STATE_DIM]) -> Trace {
        let z1 = self.fc1.forward(x);
        let h1 = relu(&z1);
        let z2 = self.fc2.forward(&h1);
        let h2 = relu(&z2);
        let v = self.value.forward(&h2)[0];
        let a = self.advantage.forward(&h2);
        let mean = a.iter().sum::<f64>() / NUM_ACTIONS as f64;
        let mut q = [0.0; NUM_ACTIONS];
        for (qi, ai) in q.iter_mut().zip(&a) {
            *qi = v + ai - mean;
        }
        Trace {
            x: *x,
            z1,
            h1,
            z2,
            h2,
            q,
        }
    }

    /// Q-values for a normalized state.
    pub fn q(&self, x: &[f64; STATE_DIM]) -> [f64; NUM_ACTIONS] {
        self.trace(x).q
    }

    fn backward(&self, t: &Trace, dq: &[f64; NUM_ACTIONS], grad: &mut DqnParams) {
        let dv = dq.iter().sum::<f64>();
        let mean = dv / NUM_ACTIONS as f64;
        let da: Vec<f64> = dq.iter().map(|g| g - mean).collect();
        let mut dh2 = self.value.backward(&t.h2, &[dv], &mut grad.value);
        let dh2a = self.advantage.backward(&t.h2, &da, &mut grad.advantage);
        for (d, e) in dh2.iter_mut().zip(dh2a) {
            *d += e;
        }
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&t.z2)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        let dh1 = self.fc2.backward(&t.h1, &dz2, &mut grad.fc2);
        let dz1: Vec<f64> = dh1
            .iter()
            .zip(&t.z1)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        self.fc1.backward(&t.x, &dz1, &mut grad.fc1);
    }

    pub fn add_scaled(&mut self, other: &DqnParams, scale: f64) {
        for (p, g) in self.flat_mut().into_iter().zip(other.flat()) {
            *p += scale * g;
        }
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One transition in network-input form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    pub done: bool,
}

pub fn huber(delta: f64, k: f64) -> f64 {
    let a = delta.abs();
    if a <= k {
        0.5 * delta * delta
    } else {
        k * (a - 0.5 * k)
    }
}

fn huber_grad(delta: f64, k: f64) -> f64 {
    delta.clamp(-k, k)
}

/// TD target `r` for terminal transitions, else `r + gamma * max_a' Q_target(s', a')`.
pub fn td_target(target: &DqnParams, t: &Transition, gamma: f64) -> f64 {
    if t.done {
        t.reward
    } else {
        let next = target.q(&t.next_state);
        t.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean Huber TD loss of `main` on `batch` with targets from `target`.
pub fn td_loss(
    main: &DqnParams,
    target: &DqnParams,
    batch: &[Transition],
    gamma: f64,
    huber_k: f64,
) -> f64 {
    batch
        .iter()
        .map(|t| {
            huber(
                main.q(&t.state)[t.action] - td_target(target, t, gamma),
                huber_k,
            )
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Loss and gradient of [`td_loss`] with respect to `main`. Targets are
/// treated as constants.
pub fn td_loss_grad(
    main: &DqnParams,
    target: &DqnParams,
    batch: &[Transition],
    gamma: f64,
    huber_k: f64,
) -> (f64, DqnParams) {
    let n = batch.len() as f64;
    let mut grad = DqnParams::zeros(main.hidden());
    let mut loss = 0.0;
    for t in batch {
        let y = td_target(target, t, gamma);
        let tr = main.trace(&t.state);
        let delta = tr.q[t.action] - y;
        loss += huber(delta, huber_k);
        let mut dq = [0.0; NUM_ACTIONS];
        dq[t.action] = huber_grad(delta, huber_k) / n;
        main.backward(&tr, &dq, &mut grad);
    }
    (loss / n, grad)
}

/// Scales `grad` in place so its L2 norm is at most `max_norm`.
pub fn clip_grad(grad: &mut DqnParams, max_norm: f64) {
    let norm = grad.norm();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grad.flat_mut().into_iter().for_each(|v| *v *= s);
    }
}

/// One plain gradient-descent step on the TD loss. Returns the updated
/// network and the pre-update loss.
pub fn td_train_step(
    main: &DqnParams,
    target: &DqnParams,
    batch: &[Transition],
    gamma: f64,
    lr: f64,
    clip: f64,
) -> (DqnParams, f64) {
    let (loss, mut grad) = td_loss_grad(main, target, batch, gamma, 1.0);
    clip_grad(&mut grad, clip);
    let mut next = main.clone();
    next.add_scaled(&grad, -lr);
    (next, loss)
}

/// TD loss against fixed targets `ys`, plus the piece of the piecewise
/// smooth loss the batch sits in: the sign of every ReLU pre-activation and
/// the Huber branch of every residual.
fn loss_and_region(
    main: &DqnParams,
    batch: &[Transition],
    ys: &[f64],
    huber_k: f64,
) -> (f64, Vec<i8>) {
    let mut loss = 0.0;
    let mut region = Vec::new();
    for (t, &y) in batch.iter().zip(ys) {
        let tr = main.trace(&t.state);
        region.extend(tr.z1.iter().chain(&tr.z2).map(|&z| (z > 0.0) as i8));
        let delta = tr.q[t.action] - y;
        loss += huber(delta, huber_k);
        region.push(if delta > huber_k {
            1
        } else if delta < -huber_k {
            -1
        } else {
            0
        });
    }
    (loss / batch.len() as f64, region)
}

/// Worst relative error between the analytic TD-loss gradient and finite
/// differences over every parameter, measured with [`relative_error`].
pub fn grad_check(main: &DqnParams, target: &DqnParams, batch: &[Transition], gamma: f64) -> f64 {
    let (_, analytic) = td_loss_grad(main, target, batch, gamma, 1.0);
    grad_check_against(main, target, batch, gamma, &analytic)
}

/// Finite-difference comparison against a caller-supplied gradient.
///
/// Central differences are used unless a probe crosses a ReLU or Huber
/// kink; then the one-sided difference on the side that stays in the
/// current piece is used instead. Without this, a pre-activation within
/// one step of zero shows up as a spurious mismatch.
pub fn grad_check_against(
    main: &DqnParams,
    target: &DqnParams,
    batch: &[Transition],
    gamma: f64,
    analytic: &DqnParams,
) -> f64 {
    let ys: Vec<f64> = batch.iter().map(|t| td_target(target, t, gamma)).collect();
    let (base, region) = loss_and_region(main, batch, &ys, 1.0);
    let h = crate::gradcheck::DQN_STEP;
    let mut probe = main.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.flat().into_iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + h;
        let (up, r_up) = loss_and_region(&probe, batch, &ys, 1.0);
        *probe.param_mut(i) = orig - h;
        let (down, r_down) = loss_and_region(&probe, batch, &ys, 1.0);
        *probe.param_mut(i) = orig;
        let numeric = match (r_up == region, r_down == region) {
            (true, true) => (up - down) / (2.0 * h),
            (true, false) => (up - base) / h,
            (false, true) => (base - down) / h,
            // sitting on a kink from both sides: no derivative to compare
            (false, false) => continue,
        };
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> [f64; STATE_DIM] {
        [
            rng.gen_range(0.0..1.2),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.1..1.0),
        ]
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
        (0..n)
            .map(|i| Transition {
                state: random_state(rng),
                action: i % NUM_ACTIONS,
                reward: rng.gen_range(-1.0..1.5),
                next_state: random_state(rng),
                done: i == n - 1,
            })
            .collect()
    }

    /// Straight matrix arithmetic, no shared code with `DqnParams::q`.
    fn reference_q(p: &DqnParams, x: &[f64; STATE_DIM]) -> [f64; NUM_ACTIONS] {
        let h = p.hidden();
        let mut h1 = vec![0.0; h];
        for o in 0..h {
            let mut s = p.fc1.b[o];
            for i in 0..STATE_DIM {
                s += p.fc1.w[o * STATE_DIM + i] * x[i];
            }
            h1[o] = if s > 0.0 { s } else { 0.0 };
        }
        let mut h2 = vec![0.0; h];
        for o in 0..h {
            let mut s = p.fc2.b[o];
            for i in 0..h {
                s += p.fc2.w[o * h + i] * h1[i];
            }
            h2[o] = if s > 0.0 { s } else { 0.0 };
        }
        let mut v = p.value.b[0];
        for i in 0..h {
            v += p.value.w[i] * h2[i];
        }
        let mut a = [0.0; NUM_ACTIONS];
        for (k, ak) in a.iter_mut().enumerate() {
            *ak = p.advantage.b[k];
            for i in 0..h {
                *ak += p.advantage.w[k * h + i] * h2[i];
            }
        }
        let m = (a[0] + a[1] + a[2]) / 3.0;
        [v + a[0] - m, v + a[1] - m, v + a[2] - m]
    }

    #[test]
    fn forward_matches_reference_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = DqnParams::init(64, &mut rng);
        for _ in 0..20 {
            let x = random_state(&mut rng);
            let (q, r) = (p.q(&x), reference_q(&p, &x));
            for k in 0..NUM_ACTIONS {
                assert!((q[k] - r[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_network_gives_value_bias_everywhere() {
        let mut p = DqnParams::zeros(64);
        p.value.b[0] = 0.37;
        assert_eq!(p.q(&[0.3, 0.5, 0.2, 0.4]), [0.37; 3]);
    }

    #[test]
    fn advantage_bias_shift_leaves_q_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = DqnParams::init(64, &mut rng);
        let mut shifted = p.clone();
        shifted.advantage.b.iter_mut().for_each(|b| *b += 3.75);
        let x = random_state(&mut rng);
        let (a, b) = (p.q(&x), shifted.q(&x));
        for k in 0..NUM_ACTIONS {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn terminal_and_myopic_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = DqnParams::init(64, &mut rng);
        let mut t = batch(&mut rng, 1)[0];
        t.done = true;
        assert_eq!(td_target(&target, &t, 0.99), t.reward);
        t.done = false;
        assert_eq!(td_target(&target, &t, 0.0), t.reward);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let main = DqnParams::init(64, &mut rng);
            let target = DqnParams::init(64, &mut rng);
            let b = batch(&mut rng, 4);
            let err = grad_check(&main, &target, &b, 0.99);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let main = DqnParams::init(64, &mut rng);
        let target = DqnParams::init(64, &mut rng);
        let b = batch(&mut rng, 4);
        let (_, mut g) = td_loss_grad(&main, &target, &b, 0.99, 1.0);
        assert!(grad_check_against(&main, &target, &b, 0.99, &g) < 1e-4);
        g.value.b[0] *= 1.5;
        assert!(grad_check_against(&main, &target, &b, 0.99, &g) > 1e-2);
    }

    #[test]
    fn param_mut_follows_flat_order() {
        let mut p = DqnParams::init(8, &mut ChaCha8Rng::seed_from_u64(2));
        let flat = p.flat();
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(*p.param_mut(i), *v);
        }
    }

    #[test]
    fn small_step_decreases_batch_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let main = DqnParams::init(64, &mut rng);
        let target = main.clone();
        let b = batch(&mut rng, 32);
        let (next, before) = td_train_step(&main, &target, &b, 0.99, 1e-4, 10.0);
        let after = td_loss(&next, &target, &b, 0.99, 1.0);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let main = DqnParams::init(64, &mut rng);
        let b = batch(&mut rng, 8);
        let (next, _) = td_train_step(&main, &main, &b, 0.99, 0.0, 10.0);
        assert_eq!(next, main);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = DqnParams::init(64, &mut rng);
        g.flat_mut().into_iter().for_each(|v| *v *= 100.0);
        clip_grad(&mut g, 10.0);
        assert!((g.norm() - 10.0).abs() < 1e-9);
    }
}
