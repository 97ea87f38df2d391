//! The six-node decision cycle:
//!
//! ```text
//! Collect -> FeatureProcess -> Infer -> Validate -> Execute -> Learn
//! ```
//!
//! One call to [`run_cycle`] is one pass. Node failures never abort the
//! cycle; they are written to the trace and the cycle degrades (for example,
//! a missing forecast falls back to the current memory utilization).

use serde::{Deserialize, Serialize};

use crate::agent::{DqnAgent, Experience, ScalingAction, StateVector};
use crate::forecaster::{ForecastResult, Forecaster, LOOKBACK};
use crate::metrics::{utilization, MetricsSample, SeriesStore};
use crate::reward::{evaluate, Observation, RewardBreakdown, RewardConfig};
use crate::simcore::{ClusterState, Seconds};

pub const DEFAULT_DECISION_INTERVAL: Seconds = 30;

pub const NODES: [&str; 6] = [
    "Collect",
    "FeatureProcess",
    "Infer",
    "Validate",
    "Execute",
    "Learn",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ValidationVerdict {
    Approve,
    Override {
        action: ScalingAction,
        reason: String,
    },
    Reject {
        reason: String,
    },
}

impl ValidationVerdict {
    /// The action actually executed under this verdict.
    pub fn resolve(&self, proposed: ScalingAction) -> ScalingAction {
        match self {
            Self::Approve => proposed,
            Self::Override { action, .. } => *action,
            Self::Reject { .. } => ScalingAction::KeepSame,
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, Self::Reject { .. })
    }
}

/// What a validator may look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationContext<'a> {
    pub state_vec: &'a StateVector,
    pub forecast: Option<&'a ForecastResult>,
    pub current_replicas: u32,
    pub min_replicas: u32,
    pub max_replicas: u32,
    /// Memory utilization target as a fraction.
    pub mem_target: f64,
}

/// Reviews a proposed action. Implementations must be pure in the context.
pub trait Validator {
    fn validate(&self, proposed: ScalingAction, ctx: &ValidationContext) -> ValidationVerdict;
}

/// Deterministic stand-in for a language-model reviewer.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleValidator;

impl Validator for RuleValidator {
    fn validate(&self, proposed: ScalingAction, ctx: &ValidationContext) -> ValidationVerdict {
        rule_validator(proposed, ctx)
    }
}

/// Rejects scale-down into predicted memory pressure and any scaling that
/// clamping at the replica bounds would turn into a no-op.
pub fn rule_validator(proposed: ScalingAction, ctx: &ValidationContext) -> ValidationVerdict {
    let reject = |reason: &str| ValidationVerdict::Reject {
        reason: reason.to_string(),
    };
    match proposed {
        ScalingAction::KeepSame => ValidationVerdict::Approve,
        ScalingAction::ScaleDown if ctx.state_vec.s1 > ctx.mem_target * 100.0 => {
            reject("predicted memory pressure")
        }
        ScalingAction::ScaleDown if ctx.current_replicas <= ctx.min_replicas => {
            reject("at min replicas")
        }
        ScalingAction::ScaleUp if ctx.current_replicas >= ctx.max_replicas => {
            reject("at max replicas")
        }
        _ => ValidationVerdict::Approve,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub node: String,
    pub summary: String,
}

/// Everything one cycle saw and did, filled in node by node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleState {
    pub t: Seconds,
    pub sample: MetricsSample,
    pub forecast: Option<ForecastResult>,
    pub state_vec: Option<StateVector>,
    pub proposed: Option<ScalingAction>,
    pub verdict: Option<ValidationVerdict>,
    pub action: Option<ScalingAction>,
    /// Replica target after Execute.
    pub executed: Option<u32>,
    /// Reward of the transition that ended at this cycle.
    pub reward: Option<RewardBreakdown>,
    /// Batch loss of the train step taken in Learn, if any.
    pub train_loss: Option<f64>,
    pub trace: Vec<TraceEntry>,
}

impl CycleState {
    fn record(&mut self, node: usize, summary: String) {
        debug_assert_eq!(self.trace.len(), node, "nodes ran out of order");
        self.trace.push(TraceEntry {
            node: NODES[node].to_string(),
            summary,
        });
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.trace.iter().map(|e| e.node.as_str()).collect()
    }
}

/// The decision that is waiting for its outcome.
#[derive(Debug, Clone, PartialEq)]
struct PendingDecision {
    state: StateVector,
    action: ScalingAction,
    obs: Observation,
}

/// Loop state carried between cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Explore, store experiences and train on every cycle.
    pub training: bool,
    /// Exploration rate used when not training.
    pub eval_epsilon: f64,
    /// Cycle time at or after which transitions are marked terminal.
    pub episode_end: Seconds,
    /// Executed actions, oldest first.
    pub history: Vec<ScalingAction>,
    pending: Option<PendingDecision>,
}

impl ControllerState {
    pub fn new(training: bool, episode_end: Seconds) -> Self {
        Self {
            training,
            eval_epsilon: 0.0,
            episode_end,
            history: Vec::new(),
            pending: None,
        }
    }
}

pub struct CycleDeps<'a> {
    pub cluster: &'a mut ClusterState,
    pub store: &'a SeriesStore,
    pub forecaster: Option<&'a mut Forecaster>,
    pub agent: &'a mut DqnAgent,
    pub reward: &'a RewardConfig,
    pub validator: &'a dyn Validator,
    pub control: &'a mut ControllerState,
}

fn observation(sample: &MetricsSample, forecast: Option<&ForecastResult>) -> Observation {
    let (cpu, mem) = utilization(sample);
    let predicted_mem = forecast
        .filter(|_| sample.total_mem_limit > 0.0)
        .map(|f| f.predicted_total_mem_mib / sample.total_mem_limit);
    Observation {
        u_cpu: cpu / 100.0,
        u_mem: mem / 100.0,
        predicted_mem,
        confidence: forecast.map_or(0.0, |f| f.confidence),
    }
}

/// Runs one full decision cycle at time `t` against the latest scrape.
pub fn run_cycle(deps: CycleDeps<'_>, t: Seconds) -> CycleState {
    let CycleDeps {
        cluster,
        store,
        forecaster,
        agent,
        reward,
        validator,
        control,
    } = deps;

    // Collect
    let sample = store
        .latest()
        .copied()
        .unwrap_or_else(|| crate::metrics::scrape(cluster));
    let mut cs = CycleState {
        t,
        sample,
        forecast: None,
        state_vec: None,
        proposed: None,
        verdict: None,
        action: None,
        executed: None,
        reward: None,
        train_loss: None,
        trace: Vec::with_capacity(NODES.len()),
    };
    let summary = match (forecaster, store.window(t, LOOKBACK)) {
        (Some(f), Ok(window)) => match f.predict(t, window) {
            Ok(fc) => {
                cs.forecast = Some(fc);
                format!(
                    "pods={} forecast={:.1}MiB confidence={:.3}",
                    sample.pod_count, fc.predicted_total_mem_mib, fc.confidence
                )
            }
            Err(e) => format!("pods={} forecast omitted: {e}", sample.pod_count),
        },
        (Some(_), Err(e)) => format!("pods={} forecast omitted: {e}", sample.pod_count),
        (None, _) => format!("pods={} forecast omitted: no model", sample.pod_count),
    };
    cs.record(0, summary);

    // FeatureProcess
    let (cpu_pct, mem_pct) = utilization(&sample);
    let current = cluster.desired_replicas;
    let s1 = match (&cs.forecast, sample.total_mem_limit > 0.0) {
        (Some(fc), true) => fc.predicted_total_mem_mib / sample.total_mem_limit * 100.0,
        _ => mem_pct,
    };
    let state = StateVector::new(s1, cpu_pct, mem_pct, current as f64);
    cs.state_vec = Some(state);
    cs.record(
        1,
        format!(
            "s=[{:.2}, {:.2}, {:.2}, {}]",
            state.s1, state.s2, state.s3, current
        ),
    );

    // Infer
    let proposed = if control.training {
        let a = agent.act(&state, true);
        agent.decay_epsilon();
        a
    } else if control.eval_epsilon > 0.0 {
        let saved = agent.epsilon;
        agent.epsilon = control.eval_epsilon;
        let a = agent.act(&state, true);
        agent.epsilon = saved;
        a
    } else {
        agent.act(&state, false)
    };
    cs.proposed = Some(proposed);
    let q = agent.q_values(&state);
    cs.record(
        2,
        format!(
            "q=[{:.4}, {:.4}, {:.4}] proposed={proposed:?}",
            q[0], q[1], q[2]
        ),
    );

    // Validate
    let ctx = ValidationContext {
        state_vec: &state,
        forecast: cs.forecast.as_ref(),
        current_replicas: current,
        min_replicas: cluster.min_replicas,
        max_replicas: cluster.max_replicas,
        mem_target: reward.mem_target,
    };
    let verdict = validator.validate(proposed, &ctx);
    let action = verdict.resolve(proposed);
    cs.record(3, format!("{verdict:?}"));
    cs.verdict = Some(verdict);
    cs.action = Some(action);

    // Execute
    cluster.set_desired_replicas(action.apply(current));
    let executed = cluster.desired_replicas;
    cs.executed = Some(executed);
    cs.record(4, format!("{action:?}: {current} -> {executed}"));

    // Learn
    let obs = observation(&sample, cs.forecast.as_ref());
    let summary = match control.pending.take() {
        Some(prev) => {
            let breakdown = evaluate(
                &prev.obs,
                prev.action,
                &control.history,
                &obs,
                current,
                reward,
            );
            let done = t >= control.episode_end;
            agent.remember(Experience {
                state: prev.state,
                action: prev.action,
                reward: breakdown.r_total,
                next_state: state,
                done,
            });
            control.history.push(prev.action);
            let mut s = format!("r_total={:.4} done={done}", breakdown.r_total);
            if control.training {
                match agent.train() {
                    Some(loss) => {
                        cs.train_loss = Some(loss);
                        s.push_str(&format!(" loss={loss:.5}"));
                    }
                    None => s.push_str(" warming buffer"),
                }
            }
            cs.reward = Some(breakdown);
            s
        }
        None => "first cycle, no transition yet".to_string(),
    };
    control.pending = Some(PendingDecision { state, action, obs });
    cs.record(5, summary);
    cs
}
