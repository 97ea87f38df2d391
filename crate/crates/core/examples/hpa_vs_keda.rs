//! Runs both reactive baselines on the same traffic and prints the comparison.

use nimbus::harness::{compare, run_experiment, Autoscaler, ExperimentConfig};

fn main() {
    let reports: Vec<_> = [Autoscaler::Hpa, Autoscaler::Keda]
        .into_iter()
        .map(|autoscaler| {
            let cfg = ExperimentConfig {
                autoscaler,
                ..Default::default()
            };
            run_experiment(&cfg).expect("baseline run")
        })
        .collect();
    for r in &reports {
        println!("{}", r.autoscaler.name());
        for p in &r.per_phase {
            println!(
                "  {:<10} avg={:.2} pod_s={:<5} events={}",
                p.phase,
                p.summary.avg_replicas,
                p.summary.resource_integral,
                p.summary.scaling_events
            );
        }
    }
    println!();
    print!("{}", compare(&reports).expect("two reports").to_text());
}
