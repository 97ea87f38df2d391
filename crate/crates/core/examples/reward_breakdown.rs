//! Scores a few hand-picked transitions and prints every reward component.

use nimbus::agent::ScalingAction::{self, *};
use nimbus::reward::{evaluate, Observation, RewardConfig};

// name, before, action, history, after, replicas
type Case = (
    &'static str,
    Observation,
    ScalingAction,
    &'static [ScalingAction],
    Observation,
    u32,
);

fn obs(u_cpu: f64, u_mem: f64, predicted_mem: Option<f64>) -> Observation {
    Observation {
        u_cpu,
        u_mem,
        predicted_mem,
        confidence: 0.8,
    }
}

fn main() {
    let cfg = RewardConfig::default();
    let cases: [Case; 4] = [
        (
            "overload, scale up",
            obs(0.95, 0.9, Some(0.95)),
            ScaleUp,
            &[],
            obs(0.72, 0.78, Some(0.8)),
            4,
        ),
        (
            "idle, scale down",
            obs(0.2, 0.3, Some(0.3)),
            ScaleDown,
            &[],
            obs(0.35, 0.45, Some(0.4)),
            2,
        ),
        (
            "in band, hold",
            obs(0.7, 0.8, None),
            KeepSame,
            &[],
            obs(0.7, 0.8, None),
            3,
        ),
        (
            "flip-flop",
            obs(0.2, 0.3, None),
            ScaleDown,
            &[ScaleUp],
            obs(0.3, 0.4, None),
            5,
        ),
    ];
    for (name, before, action, history, after, replicas) in cases {
        let b = evaluate(&before, action, history, &after, replicas, &cfg);
        println!(
            "{name:<20} cur={:.3} fc={:.3} w={:.2}/{:.2} comb={:.3} stab={:+.2} bonus={:+.2} cost={:.3} total={:+.3}",
            b.r_current,
            b.r_forecast,
            b.w_current,
            b.w_forecast,
            b.r_combined,
            b.r_stability,
            b.r_action_bonus,
            b.r_cost_penalty,
            b.r_total
        );
        assert!(b.identity_holds());
    }
}
