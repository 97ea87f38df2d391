//! Dueling DQN scaling policy: state encoding, epsilon-greedy action
//! selection, experience replay and target-network training.

mod network;
mod replay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use network::{
    clip_grad, grad_check, grad_check_against, huber, td_loss, td_loss_grad, td_target,
    td_train_step, Dense, DqnParams, Transition, NUM_ACTIONS, STATE_DIM,
};
pub use replay::{ReplayBuffer, DEFAULT_CAPACITY};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("replay buffer holds {have} experiences, batch needs {need}")]
    InsufficientExperiences { have: usize, need: usize },
}

/// The three discrete actions, in fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalingAction {
    ScaleDown,
    KeepSame,
    ScaleUp,
}

impl ScalingAction {
    pub const ALL: [ScalingAction; NUM_ACTIONS] = [Self::ScaleDown, Self::KeepSame, Self::ScaleUp];

    pub fn index(self) -> usize {
        match self {
            Self::ScaleDown => 0,
            Self::KeepSame => 1,
            Self::ScaleUp => 2,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// Replica delta: -1, 0 or +1.
    pub fn delta(self) -> i32 {
        self.index() as i32 - 1
    }

    pub fn opposite(self) -> Self {
        match self {
            Self::ScaleDown => Self::ScaleUp,
            Self::KeepSame => Self::KeepSame,
            Self::ScaleUp => Self::ScaleDown,
        }
    }

    pub fn is_scaling(self) -> bool {
        self != Self::KeepSame
    }

    /// Applies the action to a replica count.
    pub fn apply(self, replicas: u32) -> u32 {
        (replicas as i64 + self.delta() as i64).max(0) as u32
    }
}

/// `[predicted mem %, cpu %, mem %, replicas]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl StateVector {
    pub fn new(predicted_mem_pct: f64, cpu_pct: f64, mem_pct: f64, replicas: f64) -> Self {
        Self {
            s1: predicted_mem_pct,
            s2: cpu_pct,
            s3: mem_pct,
            s4: replicas,
        }
    }

    /// Network input: percentages as fractions, replicas over `max_replicas`.
    pub fn normalized(&self, max_replicas: u32) -> [f64; STATE_DIM] {
        [
            self.s1 / 100.0,
            self.s2 / 100.0,
            self.s3 / 100.0,
            self.s4 / max_replicas.max(1) as f64,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: StateVector,
    pub action: ScalingAction,
    pub reward: f64,
    pub next_state: StateVector,
    pub done: bool,
}

impl Experience {
    pub fn to_transition(&self, max_replicas: u32) -> Transition {
        Transition {
            state: self.state.normalized(max_replicas),
            action: self.action.index(),
            reward: self.reward,
            next_state: self.next_state.normalized(max_replicas),
            done: self.done,
        }
    }
}

pub fn q_values(params: &DqnParams, state: &StateVector, max_replicas: u32) -> [f64; NUM_ACTIONS] {
    params.q(&state.normalized(max_replicas))
}

/// Argmax over Q; ties go to KeepSame, then to the lower index.
pub fn greedy(q: &[f64; NUM_ACTIONS]) -> ScalingAction {
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if q[ScalingAction::KeepSame.index()] == best {
        return ScalingAction::KeepSame;
    }
    let i = q.iter().position(|&v| v == best).unwrap_or(1);
    ScalingAction::from_index(i)
}

pub fn select_action<R: Rng>(
    params: &DqnParams,
    state: &StateVector,
    max_replicas: u32,
    epsilon: f64,
    rng: &mut R,
) -> ScalingAction {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        ScalingAction::from_index(rng.gen_range(0..NUM_ACTIONS))
    } else {
        greedy(&q_values(params, state, max_replicas))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub hidden: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_every: u64,
    pub grad_clip: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
    pub optimizer: Optimizer,
    pub max_replicas: u32,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            gamma: 0.99,
            lr: 0.001,
            batch_size: 32,
            buffer_capacity: DEFAULT_CAPACITY,
            target_sync_every: 100,
            grad_clip: 10.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 0.995,
            optimizer: Optimizer::Sgd,
            max_replicas: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut DqnParams, grad: &DqnParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (i, (p, g)) in params.flat_mut().into_iter().zip(grad.flat()).enumerate() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Main/target networks plus replay memory and exploration schedule.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: AgentConfig,
    pub main: DqnParams,
    pub target: DqnParams,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    pub train_steps: u64,
    pub syncs: u64,
    rng: ChaCha8Rng,
    adam: Option<AdamState>,
}

impl DqnAgent {
    pub fn new(config: AgentConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let main = DqnParams::init(config.hidden, &mut rng);
        Self::from_params(config, main, rng)
    }

    /// Wraps pre-trained weights; the target starts as a copy.
    pub fn with_params(config: AgentConfig, main: DqnParams) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::from_params(config, main, rng)
    }

    fn from_params(config: AgentConfig, main: DqnParams, rng: ChaCha8Rng) -> Self {
        let adam = (config.optimizer == Optimizer::Adam).then(|| AdamState::new(main.num_params()));
        Self {
            target: main.clone(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: config.epsilon_start,
            train_steps: 0,
            syncs: 0,
            main,
            rng,
            adam,
            config,
        }
    }

    pub fn q_values(&self, state: &StateVector) -> [f64; NUM_ACTIONS] {
        q_values(&self.main, state, self.config.max_replicas)
    }

    /// Epsilon-greedy when `explore`, otherwise greedy.
    pub fn act(&mut self, state: &StateVector, explore: bool) -> ScalingAction {
        let eps = if explore { self.epsilon } else { 0.0 };
        select_action(
            &self.main,
            state,
            self.config.max_replicas,
            eps,
            &mut self.rng,
        )
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_end);
    }

    pub fn remember(&mut self, exp: Experience) {
        self.buffer.push(exp);
    }

    /// One training step on a uniformly sampled batch, once the buffer holds
    /// at least a batch. Returns the batch loss before the update.
    pub fn train(&mut self) -> Option<f64> {
        let batch = self
            .buffer
            .sample(self.config.batch_size, &mut self.rng)
            .ok()?;
        let transitions: Vec<Transition> = batch
            .iter()
            .map(|e| e.to_transition(self.config.max_replicas))
            .collect();
        let loss = match self.adam.as_mut() {
            None => {
                let (next, loss) = td_train_step(
                    &self.main,
                    &self.target,
                    &transitions,
                    self.config.gamma,
                    self.config.lr,
                    self.config.grad_clip,
                );
                self.main = next;
                loss
            }
            Some(adam) => {
                let (loss, mut grad) = td_loss_grad(
                    &self.main,
                    &self.target,
                    &transitions,
                    self.config.gamma,
                    1.0,
                );
                clip_grad(&mut grad, self.config.grad_clip);
                adam.step(&mut self.main, &grad, self.config.lr);
                loss
            }
        };
        self.train_steps += 1;
        if self
            .train_steps
            .is_multiple_of(self.config.target_sync_every)
        {
            self.sync_target();
        }
        Some(loss)
    }

    pub fn sync_target(&mut self) {
        self.target = self.main.clone();
        self.syncs += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> StateVector {
        StateVector::new(40.0, 65.0, 38.0, 3.0)
    }

    #[test]
    fn action_indices_and_deltas() {
        let d: Vec<_> = ScalingAction::ALL
            .iter()
            .map(|a| (a.index(), a.delta()))
            .collect();
        assert_eq!(d, vec![(0, -1), (1, 0), (2, 1)]);
        assert_eq!(ScalingAction::ScaleDown.apply(3), 2);
    }

    #[test]
    fn greedy_argmax_and_ties() {
        assert_eq!(greedy(&[0.1, 0.9, 0.3]), ScalingAction::KeepSame);
        assert_eq!(greedy(&[0.5, 0.5, 0.5]), ScalingAction::KeepSame);
        assert_eq!(greedy(&[0.7, 0.1, 0.7]), ScalingAction::ScaleDown);
        assert_eq!(greedy(&[0.1, 0.2, 0.7]), ScalingAction::ScaleUp);
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = DqnParams::zeros(8);
        p.advantage.b = vec![0.1, 0.9, 0.3];
        for _ in 0..50 {
            assert_eq!(
                select_action(&p, &state(), 10, 0.0, &mut rng),
                ScalingAction::KeepSame
            );
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let p = DqnParams::zeros(8);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[select_action(&p, &state(), 10, 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(state().normalized(10), [0.4, 0.65, 0.38, 0.3]);
    }

    #[test]
    fn target_syncs_every_hundred_steps() {
        let cfg = AgentConfig {
            hidden: 8,
            batch_size: 4,
            ..AgentConfig::default()
        };
        let mut agent = DqnAgent::new(cfg);
        let initial = agent.main.clone();
        assert_eq!(agent.target, initial);
        for i in 0..8 {
            agent.remember(Experience {
                state: state(),
                action: ScalingAction::from_index(i % 3),
                reward: i as f64 * 0.1,
                next_state: state(),
                done: false,
            });
        }
        for _ in 0..99 {
            agent.train().unwrap();
        }
        assert_eq!(agent.target, initial);
        agent.train().unwrap();
        assert_eq!(agent.target, agent.main);
        for _ in 0..150 {
            agent.train().unwrap();
        }
        assert_eq!(agent.train_steps, 250);
        assert_eq!(agent.syncs, 2);
        let s = state();
        agent.sync_target();
        assert_eq!(
            q_values(&agent.main, &s, 10),
            q_values(&agent.target, &s, 10)
        );
    }

    #[test]
    fn train_waits_for_a_full_batch() {
        let mut agent = DqnAgent::new(AgentConfig::default());
        assert_eq!(agent.train(), None);
    }

    #[test]
    fn epsilon_decays_to_floor() {
        let mut agent = DqnAgent::new(AgentConfig::default());
        agent.decay_epsilon();
        assert!((agent.epsilon - 0.995).abs() < 1e-12);
        for _ in 0..2000 {
            agent.decay_epsilon();
        }
        assert_eq!(agent.epsilon, 0.05);
    }
}
