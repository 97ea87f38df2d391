//! Trains the forecaster and the agent, then runs all three autoscalers on
//! the evaluation seed. Optional args: forecaster epochs, agent episodes.

use std::time::Instant;

use nimbus::forecaster::TrainOptions;
use nimbus::harness::train::{
    bootstrap, train_agent, train_forecaster, BOOTSTRAP_SEEDS, DEFAULT_EPISODES,
};
use nimbus::harness::{compare, run_with_models, Autoscaler, ExperimentConfig, Models};

fn main() {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer"));
    let epochs = args.next().unwrap_or(TrainOptions::default().epochs);
    let episodes = args.next().unwrap_or(DEFAULT_EPISODES);
    let cfg = ExperimentConfig::default();

    let start = Instant::now();
    let series = bootstrap(&cfg, &BOOTSTRAP_SEEDS).expect("bootstrap");
    let opts = TrainOptions {
        epochs,
        ..Default::default()
    };
    let fc = train_forecaster(&series, &opts, 0).expect("forecaster");
    println!(
        "forecaster: heldout mape {:.2}% ({:.1}s)",
        fc.heldout_mape,
        start.elapsed().as_secs_f64()
    );

    let start = Instant::now();
    let fc = (fc.params, fc.scaler);
    let agent = train_agent(&cfg, Some(&fc), episodes, 7).expect("agent");
    let last = agent.episodes.last().expect("at least one episode");
    println!(
        "agent: {episodes} episodes, {} train steps, last reward {:.2} ({:.1}s)",
        agent.train_steps,
        last.total_reward,
        start.elapsed().as_secs_f64()
    );

    let models = Models {
        forecaster: Some(fc),
        agent: agent.params,
    };
    let reports: Vec<_> = Autoscaler::ALL
        .iter()
        .map(|&autoscaler| {
            let cfg = ExperimentConfig {
                autoscaler,
                ..cfg.clone()
            };
            run_with_models(&cfg, Some(&models)).expect("run")
        })
        .collect();
    print!("{}", compare(&reports).expect("three reports").to_text());
}
