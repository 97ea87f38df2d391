//! Reactive baselines: an HPA-style proportional controller with scale-down
//! stabilization, and a KEDA-style polled controller with a cooldown.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::metrics::{utilization, MetricsSample};
use crate::simcore::Seconds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpaConfig {
    pub cpu_target: f64,
    pub mem_target: f64,
    pub tolerance: f64,
    pub stabilization_window: Seconds,
    /// How often the controller re-evaluates, seconds.
    pub sync_period: Seconds,
    pub min_replicas: u32,
    pub max_replicas: u32,
}

impl Default for HpaConfig {
    fn default() -> Self {
        Self {
            cpu_target: 0.70,
            mem_target: 0.80,
            tolerance: 0.10,
            stabilization_window: 30,
            sync_period: 15,
            min_replicas: 1,
            max_replicas: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KedaConfig {
    pub polling_interval: Seconds,
    pub cooldown: Seconds,
    pub cpu_target: f64,
    pub tolerance: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
}

impl Default for KedaConfig {
    fn default() -> Self {
        Self {
            polling_interval: 30,
            cooldown: 30,
            cpu_target: 0.70,
            tolerance: 0.10,
            min_replicas: 1,
            max_replicas: 10,
        }
    }
}

// Float noise allowance for the ceiling and the dead-band edge.
const NOISE: f64 = 1e-9;

/// `ceil(current * ratio)` that ignores float noise just above an integer,
/// so `2 * (1.05 / 0.70)` yields 3 rather than 4.
fn scaled_ceil(current: u32, ratio: f64) -> u32 {
    let x = current as f64 * ratio;
    (x - NOISE).ceil().max(0.0) as u32
}

fn proportional(current: u32, ratio: f64, tolerance: f64, min: u32, max: u32) -> u32 {
    let raw = // 0.77 / 0.70 is 1.1000000000000001, still inside a 10% band
    if (ratio - 1.0).abs() <= tolerance + NOISE {
        current
    } else {
        scaled_ceil(current, ratio)
    };
    raw.clamp(min, max)
}

/// Unstabilized HPA recommendation.
pub fn hpa_desired(cfg: &HpaConfig, current: u32, cpu_frac: f64, mem_frac: f64) -> u32 {
    let ratio = (cpu_frac / cfg.cpu_target).max(mem_frac / cfg.mem_target);
    proportional(
        current,
        ratio,
        cfg.tolerance,
        cfg.min_replicas,
        cfg.max_replicas,
    )
}

/// Applies scale-down stabilization to a raw recommendation.
///
/// `history` holds earlier `(time, raw)` recommendations; only those newer
/// than `t - stabilization_window` count. Scale-up passes through unchanged.
pub fn hpa_decide(
    cfg: &HpaConfig,
    history: &VecDeque<(Seconds, u32)>,
    t: Seconds,
    current: u32,
    raw: u32,
) -> u32 {
    if raw >= current {
        return raw;
    }
    let held = history
        .iter()
        .filter(|(ts, _)| ts + cfg.stabilization_window > t)
        .map(|&(_, r)| r)
        .fold(raw, u32::max);
    held.min(current)
}

/// HPA controller state: the recommendation history it stabilizes over.
#[derive(Debug, Clone, Default)]
pub struct HpaController {
    pub cfg: HpaConfig,
    history: VecDeque<(Seconds, u32)>,
}

impl HpaController {
    pub fn new(cfg: HpaConfig) -> Self {
        Self {
            cfg,
            history: VecDeque::new(),
        }
    }

    pub fn decide(&mut self, t: Seconds, current: u32, sample: &MetricsSample) -> u32 {
        let (cpu, mem) = utilization(sample);
        let raw = hpa_desired(&self.cfg, current, cpu / 100.0, mem / 100.0);
        let out = hpa_decide(&self.cfg, &self.history, t, current, raw);
        self.history.push_back((t, raw));
        let window = self.cfg.stabilization_window;
        while self
            .history
            .front()
            .is_some_and(|&(ts, _)| ts + window <= t)
        {
            self.history.pop_front();
        }
        out
    }
}

/// KEDA-style decision on CPU utilization. Scale-down is held until
/// `cooldown` seconds have passed since the last scaling event.
pub fn keda_decide(
    cfg: &KedaConfig,
    last_event_time: Option<Seconds>,
    t: Seconds,
    current: u32,
    cpu_frac: f64,
) -> u32 {
    let desired = proportional(
        current,
        cpu_frac / cfg.cpu_target,
        cfg.tolerance,
        cfg.min_replicas,
        cfg.max_replicas,
    );
    if desired < current {
        if let Some(last) = last_event_time {
            if t.saturating_sub(last) < cfg.cooldown {
                return current;
            }
        }
    }
    desired
}

#[derive(Debug, Clone, Default)]
pub struct KedaController {
    pub cfg: KedaConfig,
    pub last_event_time: Option<Seconds>,
}

impl KedaController {
    pub fn new(cfg: KedaConfig) -> Self {
        Self {
            cfg,
            last_event_time: None,
        }
    }

    pub fn decide(&mut self, t: Seconds, current: u32, sample: &MetricsSample) -> u32 {
        let (cpu, _) = utilization(sample);
        let out = keda_decide(&self.cfg, self.last_event_time, t, current, cpu / 100.0);
        if out != current {
            self.last_event_time = Some(t);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hpa_worked_examples() {
        let cfg = HpaConfig::default();
        assert_eq!(hpa_desired(&cfg, 2, 0.70, 0.40), 2);
        assert_eq!(hpa_desired(&cfg, 3, 0.35, 0.20), 2);
        assert_eq!(hpa_desired(&cfg, 4, 0.745, 0.10), 4);
    }

    #[test]
    fn memory_can_drive_hpa() {
        let cfg = HpaConfig::default();
        // mem ratio 1.2 dominates cpu ratio 0.5
        assert_eq!(hpa_desired(&cfg, 5, 0.35, 0.96), 6);
    }

    #[test]
    fn stabilization_holds_scale_down() {
        let cfg = HpaConfig::default();
        let history: VecDeque<_> = [(15, 5)].into_iter().collect();
        assert_eq!(hpa_decide(&cfg, &history, 30, 5, 3), 5);
        // the entry has aged out at t = 45
        assert_eq!(hpa_decide(&cfg, &history, 45, 5, 3), 3);
    }

    #[test]
    fn scale_up_is_immediate() {
        let cfg = HpaConfig::default();
        let history: VecDeque<_> = [(15, 1), (30, 1)].into_iter().collect();
        assert_eq!(hpa_decide(&cfg, &history, 45, 4, 6), 6);
        assert_eq!(hpa_decide(&cfg, &VecDeque::new(), 45, 4, 2), 2);
    }

    #[test]
    fn keda_cases() {
        let cfg = KedaConfig::default();
        assert_eq!(keda_decide(&cfg, Some(60), 75, 4, 0.1), 4);
        assert_eq!(keda_decide(&cfg, None, 30, 2, 1.05), 3);
        assert_eq!(keda_decide(&cfg, None, 30, 5, 0.70), 5);
        assert_eq!(keda_decide(&cfg, Some(60), 90, 4, 0.1), 1);
    }

    #[test]
    fn keda_controller_records_events() {
        let mut k = KedaController::new(KedaConfig::default());
        let mut s = MetricsSample {
            t: 30,
            pod_count: 2,
            total_cpu_millicores: 2000.0,
            total_cpu_limit: 2000.0,
            total_mem_mib: 300.0,
            total_mem_limit: 2048.0,
            desired_replicas: 2,
        };
        assert_eq!(k.decide(30, 2, &s), 3);
        assert_eq!(k.last_event_time, Some(30));
        s.total_cpu_millicores = 0.0;
        // 30 s since the event satisfies the cooldown
        assert_eq!(k.decide(60, 3, &s), 1);
    }

    proptest! {
        #[test]
        fn hpa_monotone_in_cpu_and_mem(cur in 1u32..=10, a in 0.0f64..2.0, b in 0.0f64..2.0, m in 0.0f64..1.5) {
            let cfg = HpaConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(hpa_desired(&cfg, cur, lo, m) <= hpa_desired(&cfg, cur, hi, m));
            prop_assert!(hpa_desired(&cfg, cur, m, lo) <= hpa_desired(&cfg, cur, m, hi));
        }

        #[test]
        fn outputs_within_bounds(cur in 1u32..=10, cpu in 0.0f64..5.0, mem in 0.0f64..5.0, t in 0u64..1000) {
            let h = HpaConfig::default();
            let k = KedaConfig::default();
            let r = hpa_desired(&h, cur, cpu, mem);
            prop_assert!((1..=10).contains(&r));
            let r = keda_decide(&k, Some(t / 2), t, cur, cpu);
            prop_assert!((1..=10).contains(&r));
        }

        #[test]
        fn at_target_is_fixed_point(cur in 1u32..=10, mem in 0.0f64..0.8) {
            let h = HpaConfig::default();
            prop_assert_eq!(hpa_desired(&h, cur, 0.70, mem), cur);
            prop_assert_eq!(keda_decide(&KedaConfig::default(), None, 30, cur, 0.70), cur);
        }
    }
}
