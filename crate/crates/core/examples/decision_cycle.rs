//! Runs the proactive loop with an untrained agent and prints the node trace
//! of the first few cycles.

use nimbus::agent::DqnParams;
use nimbus::harness::{run_with_models, Autoscaler, ExperimentConfig, Models};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let models = Models {
        forecaster: None,
        agent: DqnParams::init(64, &mut ChaCha8Rng::seed_from_u64(1)),
    };
    let cfg = ExperimentConfig {
        autoscaler: Autoscaler::Nimbus,
        ..Default::default()
    };
    let run = run_with_models(&cfg, Some(&models)).expect("run");
    for cycle in run.decisions.iter().take(3) {
        println!("t={}", cycle.t);
        for e in &cycle.trace {
            println!("  {:<16} {}", e.node, e.summary);
        }
    }
    println!(
        "{} cycles, avg replicas {:.2}, {} scaling events",
        run.decisions.len(),
        run.avg_replicas,
        run.scaling_events
    );
}
