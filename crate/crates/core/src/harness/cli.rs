//! Command-line front end. Usage errors exit 2, runtime errors exit 1 after
//! printing one JSON error line to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::train::{bootstrap, train_agent, train_forecaster, BOOTSTRAP_SEEDS, DEFAULT_EPISODES};
use super::{
    compare, read_report, run_experiment, write_outputs, Autoscaler, ExperimentConfig, HarnessError,
};
use crate::forecaster::{LstmOptimizer, TrainOptions};
use crate::gradcheck::run_suite;
use crate::store::{self, ModelArchive};

#[derive(Debug, Parser)]
#[command(name = "nimbus", version, about = "Proactive autoscaling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collect HPA bootstrap traces, train the LSTM and save it.
    TrainForecaster {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = BOOTSTRAP_SEEDS)]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = TrainOptions::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        init_seed: u64,
        #[arg(long, default_value = "models/forecaster.nbg.json")]
        out: PathBuf,
    },
    /// Train the DQN over seeded episodes; prints the reward curve as CSV.
    TrainAgent {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Forecaster archive used for the state's predicted-memory feature.
        #[arg(long)]
        forecaster: Option<PathBuf>,
        #[arg(long, default_value = "models/agent.nbg.json")]
        out: PathBuf,
    },
    /// Run one experiment and write report.json, timeline.csv,
    /// decisions.jsonl and rewards.csv.
    Run {
        #[arg(long)]
        autoscaler: Option<Autoscaler>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        forecaster: Option<PathBuf>,
        #[arg(long)]
        agent: Option<PathBuf>,
    },
    /// Tabulate saved report.json files side by side.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
    },
    /// Finite-difference checks of both networks.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
}

impl clap::ValueEnum for Autoscaler {
    fn value_variants<'a>() -> &'a [Self] {
        &Autoscaler::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::TrainForecaster {
            config,
            seeds,
            epochs,
            init_seed,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let series = bootstrap(&cfg, &seeds)?;
            let opts = TrainOptions {
                epochs,
                optimizer: LstmOptimizer::Sgd,
                ..TrainOptions::default()
            };
            let r = train_forecaster(&series, &opts, init_seed)?;
            let archive = ModelArchive::from_lstm(&r.params, &r.scaler)
                .with_meta("seed", init_seed)
                .with_meta("bootstrap_seeds", format!("{seeds:?}"))
                .with_meta("epochs", epochs)
                .with_meta("heldout_mape", r.heldout_mape);
            store::save(&archive, &out)?;
            println!("train_mape={:.4}", r.train_mape);
            println!("heldout_mape={:.4}", r.heldout_mape);
            println!("heldout_r2={:.4}", r.heldout_r2);
            println!("saved={}", out.display());
        }
        Command::TrainAgent {
            config,
            episodes,
            seed,
            forecaster,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let fc = match forecaster {
                Some(p) => Some(store::load(&p)?.to_lstm()?),
                None => None,
            };
            let r = train_agent(&cfg, fc.as_ref(), episodes, seed)?;
            let archive = ModelArchive::from_dqn(&r.params)
                .with_meta("seed", seed)
                .with_meta("episodes", episodes)
                .with_meta("train_steps", r.train_steps);
            store::save(&archive, &out)?;
            print!("{}", r.reward_curve_csv());
        }
        Command::Run {
            autoscaler,
            seed,
            config,
            out,
            forecaster,
            agent,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(a) = autoscaler {
                cfg.autoscaler = a;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if forecaster.is_some() {
                cfg.forecaster_model = forecaster;
            }
            if agent.is_some() {
                cfg.agent_model = agent;
            }
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| {
                PathBuf::from(format!("out/{}-{}", cfg.autoscaler.name(), cfg.seed))
            });
            let report = run_experiment(&cfg)?;
            write_outputs(&report, &out)?;
            println!(
                "autoscaler={} seed={} avg_replicas={:.4} resource_integral={} scaling_events={} out={}",
                cfg.autoscaler.name(),
                cfg.seed,
                report.avg_replicas,
                report.resource_integral,
                report.scaling_events,
                out.display()
            );
        }
        Command::Compare { reports } => {
            let reports = reports
                .iter()
                .map(|p| read_report(p))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", compare(&reports)?.to_text());
        }
        Command::Gradcheck { trials } => {
            let r = run_suite(trials);
            println!("lstm_max_rel_error={:e}", r.lstm_max());
            println!("dqn_max_rel_error={:e}", r.dqn_max());
            println!(
                "trials={} elapsed_s={:.2}",
                r.trials,
                r.elapsed.as_secs_f64()
            );
            if r.lstm_max() >= crate::gradcheck::PASS_THRESHOLD
                || r.dqn_max() >= crate::gradcheck::PASS_THRESHOLD
            {
                return Err(HarnessError::GradientMismatch(
                    r.lstm_max().max(r.dqn_max()),
                ));
            }
        }
    }
    Ok(())
}

fn json_escape(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| "\"\"".into())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{{\"error\":{},\"message\":{}}}",
                json_escape(e.kind()),
                json_escape(&e.to_string())
            );
            1
        }
    }
}
