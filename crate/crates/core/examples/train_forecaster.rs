//! Bootstraps memory traces from HPA runs, trains the LSTM, and scores the
//! held-out trace. Pass an epoch count to override the default of 50.

use nimbus::forecaster::TrainOptions;
use nimbus::harness::train::{bootstrap, train_forecaster, BOOTSTRAP_SEEDS};
use nimbus::harness::ExperimentConfig;

fn main() {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(50);
    let series = bootstrap(&ExperimentConfig::default(), &BOOTSTRAP_SEEDS).expect("bootstrap");
    let opts = TrainOptions {
        epochs,
        ..Default::default()
    };
    let r = train_forecaster(&series, &opts, 0).expect("train");
    for (e, loss) in r
        .epoch_losses
        .iter()
        .enumerate()
        .step_by((epochs / 10).max(1))
    {
        println!("epoch {e:>4} loss {loss:.4}");
    }
    println!(
        "train={} heldout={} train_mape={:.2}% heldout_mape={:.2}% r2={:.3}",
        r.train_samples, r.heldout_samples, r.train_mape, r.heldout_mape, r.heldout_r2
    );
}
