//! Offline training: the forecaster on HPA bootstrap traces, the agent on
//! seeded training episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{hpa_series, simulate, ExperimentConfig, HarnessError, Nimbus};
use crate::agent::{DqnAgent, DqnParams};
use crate::forecaster::{
    self, fit_scaler, forward, mape, r_squared, train_with, windows_from_series, Forecaster,
    LstmParams, Sample, Scaler, TrainOptions, LOOKBACK,
};
use crate::graph::ControllerState;
use crate::loadgen::LoadPlan;
use crate::metrics::MetricsSample;

/// Load seeds used to collect forecaster training data.
pub const BOOTSTRAP_SEEDS: [u64; 5] = [101, 102, 103, 104, 105];
pub const DEFAULT_EPISODES: usize = 150;

/// One HPA-driven scrape series per seed.
pub fn bootstrap(
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<Vec<MetricsSample>>, HarnessError> {
    seeds
        .iter()
        .map(|&seed| {
            let plan = LoadPlan { seed, ..cfg.plan() };
            hpa_series(cfg, &plan)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecasterReport {
    #[serde(skip)]
    pub params: LstmParams,
    pub scaler: Scaler,
    pub train_samples: usize,
    pub heldout_samples: usize,
    pub epoch_losses: Vec<f64>,
    pub train_mape: f64,
    pub heldout_mape: f64,
    pub heldout_r2: f64,
}

fn evaluate(
    params: &LstmParams,
    scaler: &Scaler,
    data: &[Sample],
) -> Result<(f64, f64), HarnessError> {
    let mut pred = Vec::with_capacity(data.len());
    for s in data {
        let r = forward(params, scaler, &s.window)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        pred.push(r.predicted_total_mem_mib);
    }
    let actual: Vec<f64> = data.iter().map(|s| s.next_total_mem).collect();
    let m = mape(&pred, &actual).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let r2 = r_squared(&pred, &actual).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    Ok((m, r2))
}

/// Fits the scaler on every training series, trains, and scores the last
/// series as held-out data.
pub fn train_forecaster(
    series: &[Vec<MetricsSample>],
    opts: &TrainOptions,
    init_seed: u64,
) -> Result<ForecasterReport, HarnessError> {
    let (heldout, training) = series
        .split_last()
        .filter(|(_, rest)| !rest.is_empty())
        .ok_or_else(|| HarnessError::ConfigInvalid("need at least two bootstrap series".into()))?;
    let feats: Vec<_> = training
        .iter()
        .flatten()
        .map(forecaster::features)
        .collect();
    let scaler = fit_scaler(&feats).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let train_set: Vec<Sample> = training
        .iter()
        .flat_map(|s| windows_from_series(s, LOOKBACK))
        .collect();
    let test_set = windows_from_series(heldout, LOOKBACK);
    if train_set.is_empty() || test_set.is_empty() {
        return Err(HarnessError::ConfigInvalid(format!(
            "series shorter than the {LOOKBACK}-sample lookback"
        )));
    }
    let init = LstmParams::init(&mut ChaCha8Rng::seed_from_u64(init_seed));
    let trained = train_with(&init, &scaler, &train_set, opts)
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let (train_mape, _) = evaluate(&trained.params, &scaler, &train_set)?;
    let (heldout_mape, heldout_r2) = evaluate(&trained.params, &scaler, &test_set)?;
    Ok(ForecasterReport {
        params: trained.params,
        scaler,
        train_samples: train_set.len(),
        heldout_samples: test_set.len(),
        epoch_losses: trained.epoch_losses,
        train_mape,
        heldout_mape,
        heldout_r2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub load_seed: u64,
    pub total_reward: f64,
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
    pub avg_replicas: f64,
}

#[derive(Debug, Clone)]
pub struct AgentReport {
    pub params: DqnParams,
    pub episodes: Vec<EpisodeStats>,
    pub train_steps: u64,
    pub syncs: u64,
}

impl AgentReport {
    /// `episode,load_seed,total_reward,mean_loss,epsilon,avg_replicas` rows.
    pub fn reward_curve_csv(&self) -> String {
        let mut out =
            String::from("episode,load_seed,total_reward,mean_loss,epsilon,avg_replicas\n");
        for e in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.episode,
                e.load_seed,
                e.total_reward,
                e.mean_loss.map_or(String::new(), |l| l.to_string()),
                e.epsilon,
                e.avg_replicas
            ));
        }
        out
    }
}

/// Runs `episodes` full experiments with training on, each under a fresh
/// load seed drawn from `seed`. One agent persists across episodes.
pub fn train_agent(
    cfg: &ExperimentConfig,
    forecaster: Option<&(LstmParams, Scaler)>,
    episodes: usize,
    seed: u64,
) -> Result<AgentReport, HarnessError> {
    cfg.validate()?;
    let (_, _, reward, agent_cfg) = cfg.bounded();
    let mut agent = DqnAgent::new(agent_cfg);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let load_seed: u64 = seeds.gen();
        let plan = LoadPlan {
            seed: load_seed,
            ..cfg.plan()
        };
        let mut nimbus = Nimbus {
            agent: &mut agent,
            forecaster: forecaster.map(|(p, s)| Forecaster::new(p.clone(), *s)),
            control: ControllerState::new(true, plan.total_duration()),
            reward: reward.clone(),
            interval: cfg.decision_interval,
        };
        let trace = simulate(cfg, &plan, &mut nimbus)?;
        let total_reward = trace
            .cycles
            .iter()
            .filter_map(|c| c.reward.as_ref().map(|r| r.r_total))
            .sum();
        let losses: Vec<f64> = trace.cycles.iter().filter_map(|c| c.train_loss).collect();
        let replicas: Vec<u32> = trace.samples.iter().map(|s| s.desired_replicas).collect();
        let avg = super::summarize(&replicas, cfg.scrape_interval)?.avg_replicas;
        stats.push(EpisodeStats {
            episode,
            load_seed,
            total_reward,
            mean_loss: (!losses.is_empty())
                .then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            epsilon: agent.epsilon,
            avg_replicas: avg,
        });
    }
    Ok(AgentReport {
        params: agent.main.clone(),
        episodes: stats,
        train_steps: agent.train_steps,
        syncs: agent.syncs,
    })
}
