//! Context-aware, multi-objective reward.
//!
//! The reward mixes a Gaussian utilization score for the observed state with
//! the same score applied to the forecast state, weighted by workload class
//! and forecast confidence, then adds action shaping and subtracts a cost
//! term:
//!
//! ```text
//! r_current  = w_cpu * g(u_cpu, 0.70) + w_mem * g(u_mem, 0.80)
//! r_forecast = w_cpu * g(u_cpu, 0.70) + w_mem * g(predicted_mem, 0.80)
//! r_combined = w_current * r_current + w_forecast * r_forecast
//! r_total    = r_combined + r_stability + r_action_bonus - r_cost_penalty
//! ```
//!
//! Every term is kept in a [`RewardBreakdown`] so runs can be audited.

use serde::{Deserialize, Serialize};

use crate::agent::ScalingAction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub cpu_target: f64,
    pub mem_target: f64,
    pub sigma: f64,
    pub w_cpu: f64,
    pub w_mem: f64,
    pub forecast_weight_base: f64,
    pub bonus_up: f64,
    pub bonus_down: f64,
    pub penalty_unnecessary: f64,
    pub penalty_thrash: f64,
    pub stability_bonus: f64,
    pub cost_coeff: f64,
    pub healthy_band: f64,
    /// Number of previous decisions inspected for direction reversals.
    pub thrash_window: usize,
    pub high_load_threshold: f64,
    pub low_load_threshold: f64,
    pub multiplier_high: f64,
    pub multiplier_nominal: f64,
    pub multiplier_low: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            cpu_target: 0.70,
            mem_target: 0.80,
            sigma: 0.15,
            w_cpu: 0.5,
            w_mem: 0.5,
            forecast_weight_base: 0.7,
            bonus_up: 0.2,
            bonus_down: 0.15,
            penalty_unnecessary: -0.3,
            penalty_thrash: -0.5,
            stability_bonus: 0.1,
            cost_coeff: 0.1,
            healthy_band: 0.10,
            thrash_window: 2,
            high_load_threshold: 0.80,
            low_load_threshold: 0.30,
            multiplier_high: 1.0,
            multiplier_nominal: 0.8,
            multiplier_low: 0.6,
            min_replicas: 1,
            max_replicas: 10,
        }
    }
}

impl RewardConfig {
    pub fn is_valid(&self) -> bool {
        let unit = |w: f64| (0.0..=1.0).contains(&w);
        unit(self.w_cpu)
            && unit(self.w_mem)
            && unit(self.forecast_weight_base)
            && (self.w_cpu + self.w_mem - 1.0).abs() < 1e-12
            && self.sigma > 0.0
            && self.min_replicas <= self.max_replicas
            && self.max_replicas > 0
    }

    fn in_band(&self, u_cpu: f64, u_mem: f64) -> bool {
        (u_cpu - self.cpu_target).abs() <= self.healthy_band
            && (u_mem - self.mem_target).abs() <= self.healthy_band
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WorkloadClass {
    Low,
    Nominal,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_cpu: f64,
    pub r_mem: f64,
    pub r_current: f64,
    pub r_forecast: f64,
    pub w_current: f64,
    pub w_forecast: f64,
    pub r_combined: f64,
    pub r_stability: f64,
    pub r_action_bonus: f64,
    pub r_cost_penalty: f64,
    pub r_total: f64,
}

impl RewardBreakdown {
    /// Checks `r_total = r_combined + r_stability + r_action_bonus - r_cost_penalty`
    /// bit for bit.
    pub fn identity_holds(&self) -> bool {
        self.r_total
            == self.r_combined + self.r_stability + self.r_action_bonus - self.r_cost_penalty
    }
}

pub fn gaussian_reward(u: f64, target: f64, sigma: f64) -> f64 {
    let d = u - target;
    (-(d * d) / (2.0 * sigma * sigma)).exp()
}

pub fn r_current(u_cpu: f64, u_mem: f64, cfg: &RewardConfig) -> f64 {
    cfg.w_cpu * gaussian_reward(u_cpu, cfg.cpu_target, cfg.sigma)
        + cfg.w_mem * gaussian_reward(u_mem, cfg.mem_target, cfg.sigma)
}

/// Utilization score of the forecast state. No CPU forecast exists, so the
/// CPU term reuses the observed utilization.
pub fn r_forecast(predicted_mem_util: f64, u_cpu: f64, cfg: &RewardConfig) -> f64 {
    r_current(u_cpu, predicted_mem_util, cfg)
}

pub fn classify_workload(u_cpu: f64, u_mem: f64, cfg: &RewardConfig) -> WorkloadClass {
    let peak = u_cpu.max(u_mem);
    if peak > cfg.high_load_threshold {
        WorkloadClass::High
    } else if peak < cfg.low_load_threshold {
        WorkloadClass::Low
    } else {
        WorkloadClass::Nominal
    }
}

/// Returns `(r_combined, w_current, w_forecast)`.
pub fn combine(
    r_cur: f64,
    r_fc: Option<f64>,
    class: WorkloadClass,
    confidence: f64,
    cfg: &RewardConfig,
) -> (f64, f64, f64) {
    let Some(r_fc) = r_fc else {
        return (r_cur, 1.0, 0.0);
    };
    let m = match class {
        WorkloadClass::High => cfg.multiplier_high,
        WorkloadClass::Nominal => cfg.multiplier_nominal,
        WorkloadClass::Low => cfg.multiplier_low,
    };
    let w_forecast = cfg.forecast_weight_base * confidence.clamp(0.0, 1.0) * m;
    let w_current = 1.0 - w_forecast;
    (w_current * r_cur + w_forecast * r_fc, w_current, w_forecast)
}

/// Returns `(r_action_bonus, r_stability)` for an action taken while
/// observing the given utilizations. `history` lists earlier actions, most
/// recent last.
///
/// - A scaling action that reverses any scaling action among the last
///   `thrash_window` decisions earns `penalty_thrash` and nothing else.
/// - ScaleUp under pressure (any utilization above its target + band) earns
///   `bonus_up`; ScaleDown with slack (every utilization below its
///   target - band) earns `bonus_down`.
/// - Any other scaling while both observed utilizations sit in the healthy
///   band earns `penalty_unnecessary`.
/// - KeepSame inside the band earns `stability_bonus`.
pub fn action_shaping(
    action: ScalingAction,
    u_cpu: f64,
    u_mem: f64,
    predicted_mem_util: Option<f64>,
    history: &[ScalingAction],
    cfg: &RewardConfig,
) -> (f64, f64) {
    let in_band = cfg.in_band(u_cpu, u_mem);
    if action == ScalingAction::KeepSame {
        let stability = if in_band { cfg.stability_bonus } else { 0.0 };
        return (0.0, stability);
    }

    let opposite = action.opposite();
    let recent = &history[history.len().saturating_sub(cfg.thrash_window)..];
    if recent.contains(&opposite) {
        return (cfg.penalty_thrash, 0.0);
    }

    let mem_hi = cfg.mem_target + cfg.healthy_band;
    let mem_lo = cfg.mem_target - cfg.healthy_band;
    let pressure = u_cpu > cfg.cpu_target + cfg.healthy_band
        || u_mem > mem_hi
        || predicted_mem_util.is_some_and(|p| p > mem_hi);
    let slack = u_cpu < cfg.cpu_target - cfg.healthy_band
        && u_mem < mem_lo
        && predicted_mem_util.is_none_or(|p| p < mem_lo);

    let bonus = match action {
        ScalingAction::ScaleUp if pressure => cfg.bonus_up,
        ScalingAction::ScaleDown if slack => cfg.bonus_down,
        _ if in_band => cfg.penalty_unnecessary,
        _ => 0.0,
    };
    (bonus, 0.0)
}

pub fn cost_penalty(replicas: u32, cfg: &RewardConfig) -> f64 {
    cfg.cost_coeff * replicas.saturating_sub(cfg.min_replicas) as f64 / cfg.max_replicas as f64
}

/// Assembles the final breakdown from its parts.
#[allow(clippy::too_many_arguments)]
pub fn total_reward(
    r_cpu: f64,
    r_mem: f64,
    r_cur: f64,
    r_fc: Option<f64>,
    combined: (f64, f64, f64),
    shaping: (f64, f64),
    replicas: u32,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let (r_combined, w_current, w_forecast) = combined;
    let (r_action_bonus, r_stability) = shaping;
    let r_cost_penalty = cost_penalty(replicas, cfg);
    RewardBreakdown {
        r_cpu,
        r_mem,
        r_current: r_cur,
        r_forecast: r_fc.unwrap_or(0.0),
        w_current,
        w_forecast,
        r_combined,
        r_stability,
        r_action_bonus,
        r_cost_penalty,
        r_total: r_combined + r_stability + r_action_bonus - r_cost_penalty,
    }
}

/// What one transition looked like, in utilization fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub u_cpu: f64,
    pub u_mem: f64,
    pub predicted_mem: Option<f64>,
    pub confidence: f64,
}

/// Reward for taking `action` at `before` and landing in `after` with
/// `replicas` replicas. Utilization terms score the outcome; shaping judges
/// the action against what was observed when it was chosen.
pub fn evaluate(
    before: &Observation,
    action: ScalingAction,
    history: &[ScalingAction],
    after: &Observation,
    replicas: u32,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    let r_cpu = gaussian_reward(after.u_cpu, cfg.cpu_target, cfg.sigma);
    let r_mem = gaussian_reward(after.u_mem, cfg.mem_target, cfg.sigma);
    let r_cur = r_current(after.u_cpu, after.u_mem, cfg);
    let r_fc = after.predicted_mem.map(|p| r_forecast(p, after.u_cpu, cfg));
    let class = classify_workload(after.u_cpu, after.u_mem, cfg);
    let combined = combine(r_cur, r_fc, class, after.confidence, cfg);
    let shaping = action_shaping(
        action,
        before.u_cpu,
        before.u_mem,
        before.predicted_mem,
        history,
        cfg,
    );
    total_reward(r_cpu, r_mem, r_cur, r_fc, combined, shaping, replicas, cfg)
}
