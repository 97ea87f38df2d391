//! Pins the replica count and averages the reward the decision loop would
//! hand out, to show where the reward peaks on this workload.

use nimbus::agent::DqnParams;
use nimbus::harness::{run_with_models, Autoscaler, ExperimentConfig, Models};

fn main() {
    // an all-zero network has equal Q-values and always keeps the count
    let models = Models {
        forecaster: None,
        agent: DqnParams::zeros(64),
    };
    println!("replicas  r_total  r_current  shaping   cost");
    for n in 1..=10u32 {
        let (mut total, mut cur, mut shaping, mut cost, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in [42u64, 1, 2, 3] {
            let cfg = ExperimentConfig {
                autoscaler: Autoscaler::Nimbus,
                seed,
                initial_replicas: n,
                ..Default::default()
            };
            let run = run_with_models(&cfg, Some(&models)).expect("run");
            for b in run.decisions.iter().filter_map(|c| c.reward) {
                total += b.r_total;
                cur += b.r_current;
                shaping += b.r_stability + b.r_action_bonus;
                cost += b.r_cost_penalty;
                k += 1.0;
            }
        }
        println!(
            "{n:>8} {:>8.3} {:>10.3} {:>8.3} {:>6.3}",
            total / k,
            cur / k,
            shaping / k,
            cost / k
        );
    }
}
