//! Deterministic simulator and library for proactive Kubernetes autoscaling.
//!
//! A dueling DQN chooses `-1 / 0 / +1` replica changes from a four-feature
//! state that includes an LSTM forecast of memory utilization. A
//! context-aware reward trains it, and a fixed six-node decision cycle runs
//! it. Reactive HPA- and KEDA-style controllers serve as baselines, and
//! everything runs against a one-second-tick model of a single deployment
//! under seeded, phased load.

pub mod agent;
pub mod baselines;
pub mod forecaster;
pub mod gradcheck;
pub mod graph;
pub mod harness;
pub mod loadgen;
pub mod metrics;
pub mod reward;
pub mod simcore;
pub mod store;
