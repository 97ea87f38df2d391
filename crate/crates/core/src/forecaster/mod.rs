//! LSTM forecaster for the deployment's total memory, 15 s ahead.
//!
//! Inputs are windows of `(total_mem_mib, pod_count)` pairs taken from the
//! scraped series. Both features are standardized with a [`Scaler`] fitted
//! on training data. The network predicts the next total memory in
//! standardized units, and [`forward`] maps it back to MiB.

mod lstm;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gradcheck::relative_error;
use crate::metrics::MetricsSample;
use crate::simcore::Seconds;

pub use lstm::{LstmLayer, LstmParams, HIDDEN_1, HIDDEN_2, INPUT_SIZE};

pub const LOOKBACK: usize = 20;
pub const HORIZON: Seconds = 15;
pub const STD_FLOOR: f64 = 1e-8;
pub const CONFIDENCE_WINDOW: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("window has {0} rows, expected {LOOKBACK}")]
    BadWindowLength(usize),
    #[error("no usable terms to average")]
    EmptyInput,
    #[error("predictions ({0}) and actuals ({1}) differ in length")]
    LengthMismatch(usize, usize),
}

/// One input row: `[total_mem_mib, pod_count]`.
pub type Features = [f64; INPUT_SIZE];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: [f64; INPUT_SIZE],
    pub std: [f64; INPUT_SIZE],
}

impl Scaler {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; INPUT_SIZE],
            std: [1.0; INPUT_SIZE],
        }
    }

    pub fn standardize(&self, x: &Features) -> Vec<f64> {
        (0..INPUT_SIZE)
            .map(|k| (x[k] - self.mean[k]) / self.std[k])
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Features {
        let mut out = [0.0; INPUT_SIZE];
        for k in 0..INPUT_SIZE {
            out[k] = z[k] * self.std[k] + self.mean[k];
        }
        out
    }

    /// Standardizes a memory value with feature 0's statistics.
    pub fn mem_to_std(&self, mem: f64) -> f64 {
        (mem - self.mean[0]) / self.std[0]
    }

    pub fn mem_from_std(&self, z: f64) -> f64 {
        z * self.std[0] + self.mean[0]
    }
}

/// Per-feature mean and population standard deviation (floored at 1e-8).
pub fn fit_scaler(dataset: &[Features]) -> Result<Scaler, ForecastError> {
    if dataset.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    let n = dataset.len() as f64;
    let mut mean = [0.0; INPUT_SIZE];
    let mut std = [0.0; INPUT_SIZE];
    for k in 0..INPUT_SIZE {
        mean[k] = dataset.iter().map(|x| x[k]).sum::<f64>() / n;
        let var = dataset
            .iter()
            .map(|x| (x[k] - mean[k]).powi(2))
            .sum::<f64>()
            / n;
        std[k] = var.sqrt().max(STD_FLOOR);
    }
    Ok(Scaler { mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub predicted_total_mem_mib: f64,
    pub horizon: Seconds,
    pub confidence: f64,
}

/// A training pair: a lookback window and the next total memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub window: Vec<Features>,
    pub next_total_mem: f64,
}

pub fn features(sample: &MetricsSample) -> Features {
    [sample.total_mem_mib, sample.pod_count as f64]
}

/// All `(window, next)` pairs from one contiguous series.
pub fn windows_from_series(series: &[MetricsSample], lookback: usize) -> Vec<Sample> {
    if series.len() <= lookback {
        return Vec::new();
    }
    (lookback..series.len())
        .map(|end| Sample {
            window: series[end - lookback..end].iter().map(features).collect(),
            next_total_mem: series[end].total_mem_mib,
        })
        .collect()
}

fn standardize_window(scaler: &Scaler, window: &[Features]) -> Vec<Vec<f64>> {
    window.iter().map(|x| scaler.standardize(x)).collect()
}

/// Predicted total memory for the interval after `window`, clamped at 0.
/// Confidence is left at 1.0; [`Forecaster`] fills it in from residuals.
pub fn forward(
    params: &LstmParams,
    scaler: &Scaler,
    window: &[Features],
) -> Result<ForecastResult, ForecastError> {
    if window.len() != LOOKBACK {
        return Err(ForecastError::BadWindowLength(window.len()));
    }
    let z = params.predict_std(&standardize_window(scaler, window));
    Ok(ForecastResult {
        predicted_total_mem_mib: scaler.mem_from_std(z).max(0.0),
        horizon: HORIZON,
        confidence: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LstmOptimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    pub clip: f64,
    pub optimizer: LstmOptimizer,
    /// Seed for the per-epoch shuffle; `None` keeps dataset order.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.001,
            clip: 5.0,
            optimizer: LstmOptimizer::Sgd,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: LstmParams,
    /// Mean standardized squared error over the dataset after each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn dataset_loss(params: &LstmParams, scaler: &Scaler, dataset: &[Sample]) -> f64 {
    dataset
        .iter()
        .map(|s| {
            params.loss_std(
                &standardize_window(scaler, &s.window),
                scaler.mem_to_std(s.next_total_mem),
            )
        })
        .sum::<f64>()
        / dataset.len() as f64
}

/// Plain per-sample gradient descent with norm clipping at 5.0.
pub fn train(
    params: &LstmParams,
    scaler: &Scaler,
    dataset: &[Sample],
    epochs: usize,
    lr: f64,
) -> Result<Trained, ForecastError> {
    train_with(
        params,
        scaler,
        dataset,
        &TrainOptions {
            epochs,
            lr,
            ..TrainOptions::default()
        },
    )
}

pub fn train_with(
    params: &LstmParams,
    scaler: &Scaler,
    dataset: &[Sample],
    opts: &TrainOptions,
) -> Result<Trained, ForecastError> {
    if dataset.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    if let Some(bad) = dataset.iter().find(|s| s.window.len() != LOOKBACK) {
        return Err(ForecastError::BadWindowLength(bad.window.len()));
    }
    let prepared: Vec<(Vec<Vec<f64>>, f64)> = dataset
        .iter()
        .map(|s| {
            (
                standardize_window(scaler, &s.window),
                scaler.mem_to_std(s.next_total_mem),
            )
        })
        .collect();

    let mut p = params.clone();
    let mut adam = Adam::new(p.num_params());
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = opts.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        for &i in &order {
            let (xs, y) = &prepared[i];
            let (_, mut g) = p.loss_grad(xs, *y);
            let norm = g.norm();
            if norm > opts.clip {
                g.scale(opts.clip / norm);
            }
            match opts.optimizer {
                LstmOptimizer::Sgd => p.add_scaled(&g, -opts.lr),
                LstmOptimizer::Adam => adam.step(&mut p, &g, opts.lr),
            }
        }
        let loss = prepared
            .iter()
            .map(|(xs, y)| p.loss_std(xs, *y))
            .sum::<f64>()
            / prepared.len() as f64;
        epoch_losses.push(loss);
    }
    Ok(Trained {
        params: p,
        epoch_losses,
    })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, p: &mut LstmParams, g: &LstmParams, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let grads: Vec<f64> = g.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        let mut i = 0;
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                let gi = grads[i];
                self.m[i] = B1 * self.m[i] + (1.0 - B1) * gi;
                self.v[i] = B2 * self.v[i] + (1.0 - B2) * gi * gi;
                *v -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
                i += 1;
            }
        }
    }
}

/// Worst relative error between BPTT gradients and central finite
/// differences over every parameter of every tensor, measured
/// with [`relative_error`].
pub fn grad_check(params: &LstmParams, scaler: &Scaler, sample: &Sample) -> f64 {
    let xs = standardize_window(scaler, &sample.window);
    let y = scaler.mem_to_std(sample.next_total_mem);
    let (_, analytic) = params.loss_grad(&xs, y);
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    grad_check_against(params, &xs, y, &analytic)
}

/// Finite-difference comparison against caller-supplied gradients. Layer-1
/// outputs are computed once and reused while probing later tensors.
pub fn grad_check_against(
    params: &LstmParams,
    xs: &[Vec<f64>],
    y: f64,
    analytic: &[Vec<f64>],
) -> f64 {
    const LAYER1_TENSORS: usize = 3;
    let h = crate::gradcheck::LSTM_STEP;
    let h1 = params.layer1_states(xs);
    let loss = |p: &LstmParams, ti: usize| {
        let d = if ti < LAYER1_TENSORS {
            p.predict_std(xs)
        } else {
            p.predict_from_h1(&h1)
        } - y;
        d * d
    };
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (ti, grads) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = probe.tensors_mut()[ti][j];
            probe.tensors_mut()[ti][j] = orig + h;
            let up = loss(&probe, ti);
            probe.tensors_mut()[ti][j] = orig - h;
            let down = loss(&probe, ti);
            probe.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    worst
}

/// Mean absolute percentage error, skipping actuals below 1 MiB.
pub fn mape(predictions: &[f64], actuals: &[f64]) -> Result<f64, ForecastError> {
    if predictions.len() != actuals.len() {
        return Err(ForecastError::LengthMismatch(
            predictions.len(),
            actuals.len(),
        ));
    }
    let terms: Vec<f64> = predictions
        .iter()
        .zip(actuals)
        .filter(|(_, a)| a.abs() >= 1.0)
        .map(|(p, a)| (p - a).abs() / a.abs() * 100.0)
        .collect();
    if terms.is_empty() {
        return Err(ForecastError::EmptyInput);
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Coefficient of determination.
pub fn r_squared(predictions: &[f64], actuals: &[f64]) -> Result<f64, ForecastError> {
    if predictions.len() != actuals.len() {
        return Err(ForecastError::LengthMismatch(
            predictions.len(),
            actuals.len(),
        ));
    }
    if actuals.is_empty() {
        return Err(ForecastError::EmptyInput);
    }
    let mean = actuals.iter().sum::<f64>() / actuals.len() as f64;
    let ss_tot: f64 = actuals.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (a - p).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn confidence(recent_residual_mape: f64) -> f64 {
    (1.0 - recent_residual_mape / 100.0).clamp(0.0, 1.0)
}

/// A trained model in service: predicts, then scores each prediction once
/// the interval it forecast has been scraped.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub params: LstmParams,
    pub scaler: Scaler,
    /// Outstanding predictions keyed by the time they target.
    pending: VecDeque<(Seconds, f64)>,
    /// Realized `(prediction, actual)` pairs, most recent last.
    realized: VecDeque<(f64, f64)>,
}

impl Forecaster {
    pub fn new(params: LstmParams, scaler: Scaler) -> Self {
        Self {
            params,
            scaler,
            pending: VecDeque::new(),
            realized: VecDeque::new(),
        }
    }

    /// Matches a fresh scrape against the prediction made for its time.
    pub fn observe(&mut self, sample: &MetricsSample) {
        while let Some(&(t, pred)) = self.pending.front() {
            if t > sample.t {
                break;
            }
            self.pending.pop_front();
            if t == sample.t {
                self.realized.push_back((pred, sample.total_mem_mib));
                while self.realized.len() > CONFIDENCE_WINDOW {
                    self.realized.pop_front();
                }
            }
        }
    }

    /// MAPE over the last five realized predictions, if five exist.
    pub fn recent_mape(&self) -> Option<f64> {
        if self.realized.len() < CONFIDENCE_WINDOW {
            return None;
        }
        let (p, a): (Vec<f64>, Vec<f64>) = self.realized.iter().copied().unzip();
        mape(&p, &a).ok()
    }

    pub fn current_confidence(&self) -> f64 {
        self.recent_mape().map_or(1.0, confidence)
    }

    /// Forecast for `t + HORIZON` from the window ending at `t`.
    pub fn predict(
        &mut self,
        t: Seconds,
        window: &[MetricsSample],
    ) -> Result<ForecastResult, ForecastError> {
        let feats: Vec<Features> = window.iter().map(features).collect();
        let mut result = forward(&self.params, &self.scaler, &feats)?;
        result.confidence = self.current_confidence();
        let target = t + HORIZON;
        if self.pending.back().is_none_or(|&(pt, _)| pt < target) {
            self.pending
                .push_back((target, result.predicted_total_mem_mib));
        }
        Ok(result)
    }
}
