//! Finite-difference gradient checks for both hand-written networks.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{DqnParams, Transition, NUM_ACTIONS, STATE_DIM};
use crate::forecaster::{self, Features, LstmParams, Sample, Scaler, LOOKBACK};

/// A check passes when the worst relative error is below this.
pub const PASS_THRESHOLD: f64 = 1e-4;

/// Central-difference step for the LSTM. Its squared-error loss can reach
/// O(100) on unscaled targets, so roundoff at `1e-5` would swamp gradients
/// of order `1e-6`; `1e-4` balances that against truncation error.
pub const LSTM_STEP: f64 = 1e-4;

/// Finite-difference step for the DQN, whose Huber loss stays O(1).
pub const DQN_STEP: f64 = 1e-5;

/// Gradients whose analytic and numeric magnitudes are both below this are
/// treated as matching exactly.
pub const ZERO_CUTOFF: f64 = 1e-8;

/// Smallest denominator used when forming a relative error. A central
/// difference carries roughly `1e-11` of float noise on an O(1) loss, so
/// below this scale the comparison is effectively absolute.
pub const SCALE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, SCALE_FLOOR)`, or 0 when both are below
/// `ZERO_CUTOFF`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < ZERO_CUTOFF {
        0.0
    } else {
        (analytic - numeric).abs() / scale.max(SCALE_FLOOR)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub trials: usize,
    /// Worst error per trial.
    pub lstm_errors: Vec<f64>,
    pub dqn_errors: Vec<f64>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn lstm_max(&self) -> f64 {
        self.lstm_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn dqn_max(&self) -> f64 {
        self.dqn_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Random LSTM parameters, a plausible memory window and a target.
pub fn lstm_trial(seed: u64) -> (LstmParams, Scaler, Sample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = LstmParams::init(&mut rng);
    let window: Vec<Features> = (0..LOOKBACK)
        .map(|_| {
            [
                rng.gen_range(150.0..4000.0),
                rng.gen_range(1.0..10.0_f64).round(),
            ]
        })
        .collect();
    let scaler = Scaler {
        mean: [rng.gen_range(500.0..2000.0), rng.gen_range(1.0..5.0)],
        std: [rng.gen_range(200.0..900.0), rng.gen_range(0.5..3.0)],
    };
    let sample = Sample {
        window,
        next_total_mem: rng.gen_range(150.0..4000.0),
    };
    (params, scaler, sample)
}

/// Random main and target networks and a batch of eight transitions.
pub fn dqn_trial(seed: u64) -> (DqnParams, DqnParams, Vec<Transition>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let main = DqnParams::init(64, &mut rng);
    let target = DqnParams::init(64, &mut rng);
    let state = |rng: &mut ChaCha8Rng| {
        let mut s = [0.0; STATE_DIM];
        s.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.2));
        s
    };
    let batch = (0..8)
        .map(|k| Transition {
            state: state(&mut rng),
            action: k % NUM_ACTIONS,
            reward: rng.gen_range(-1.0..1.5),
            next_state: state(&mut rng),
            done: k == 7,
        })
        .collect();
    (main, target, batch)
}

/// Runs `trials` seeded checks of each network (seeds `0..trials`).
pub fn run_suite(trials: usize) -> SuiteReport {
    let start = Instant::now();
    let lstm_errors = (0..trials as u64)
        .map(|s| {
            let (p, sc, sample) = lstm_trial(s);
            forecaster::grad_check(&p, &sc, &sample)
        })
        .collect();
    let dqn_errors = (0..trials as u64)
        .map(|s| {
            let (main, target, batch) = dqn_trial(s);
            crate::agent::grad_check(&main, &target, &batch, 0.99)
        })
        .collect();
    SuiteReport {
        trials,
        lstm_errors,
        dqn_errors,
        elapsed: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases() {
        assert_eq!(relative_error(1e-9, -1e-9), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        // below the floor the error is absolute, scaled by 1e-6
        assert!((relative_error(2e-8, 1e-8) - 1e-2).abs() < 1e-12);
    }

    // Seed 1 puts a ReLU pre-activation within one step of zero.
    #[test]
    fn dqn_trial_on_a_kink_still_passes() {
        let (main, target, batch) = dqn_trial(1);
        assert!(crate::agent::grad_check(&main, &target, &batch, 0.99) < PASS_THRESHOLD);
    }
}
