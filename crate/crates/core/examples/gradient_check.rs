//! Finite-difference check of both backward passes over a handful of seeds.

use nimbus::gradcheck::{run_suite, PASS_THRESHOLD};

fn main() {
    let trials = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(3);
    let r = run_suite(trials);
    for (i, (l, d)) in r.lstm_errors.iter().zip(&r.dqn_errors).enumerate() {
        println!("trial {i}: lstm {l:.2e}  dqn {d:.2e}");
    }
    let ok = r.lstm_max() < PASS_THRESHOLD && r.dqn_max() < PASS_THRESHOLD;
    println!(
        "max lstm {:.2e} dqn {:.2e} in {:.1}s -> {}",
        r.lstm_max(),
        r.dqn_max(),
        r.elapsed.as_secs_f64(),
        if ok { "ok" } else { "FAILED" }
    );
}
