//! Experiment runner: drives the simulator under one autoscaler, records the
//! replica timeline and reduces it to the comparison metrics.

pub mod cli;
pub mod train;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, DqnAgent, DqnParams};
use crate::baselines::{HpaConfig, HpaController, KedaConfig, KedaController};
use crate::forecaster::{Forecaster, LstmParams, Scaler};
use crate::graph::{
    run_cycle, ControllerState, CycleDeps, CycleState, RuleValidator, DEFAULT_DECISION_INTERVAL,
};
use crate::loadgen::{generate_arrivals, plan_with_duration, LoadError, LoadPlan, PhaseSpec};
use crate::metrics::{scrape, utilization, MetricsSample, SeriesStore, DEFAULT_SCRAPE_INTERVAL};
use crate::reward::RewardConfig;
use crate::simcore::{ClusterState, ResourceSpec, Seconds, WorkloadModel};
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("missing model: {0}")]
    MissingModel(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("empty timeline")]
    EmptyTimeline,
    #[error("reports cover different load plans")]
    MismatchedPlans,
    #[error("need at least two reports, got {0}")]
    NotEnoughReports(usize),
    #[error("gradient check failed: max relative error {0:e}")]
    GradientMismatch(f64),
    #[error("job conservation violated at t={0}")]
    ConservationViolated(Seconds),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::MissingModel(_) => "MissingModel",
            Self::ConfigInvalid(_) => "ConfigInvalid",
            Self::EmptyTimeline => "EmptyTimeline",
            Self::MismatchedPlans => "MismatchedPlans",
            Self::NotEnoughReports(_) => "NotEnoughReports",
            Self::GradientMismatch(_) => "GradientMismatch",
            Self::ConservationViolated(_) => "ConservationViolated",
            Self::Store(_) => "StoreError",
            Self::Load(_) => "LoadError",
            Self::Io(_) => "IoFailure",
            Self::Json(_) => "JsonError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Autoscaler {
    Hpa,
    Keda,
    Nimbus,
}

impl Autoscaler {
    pub const ALL: [Autoscaler; 3] = [Self::Hpa, Self::Keda, Self::Nimbus];

    pub fn name(self) -> &'static str {
        match self {
            Self::Hpa => "hpa",
            Self::Keda => "keda",
            Self::Nimbus => "nimbus",
        }
    }
}

impl std::str::FromStr for Autoscaler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hpa" => Ok(Self::Hpa),
            "keda" => Ok(Self::Keda),
            "nimbus" => Ok(Self::Nimbus),
            other => Err(format!("unknown autoscaler {other:?}")),
        }
    }
}

/// Everything a run depends on. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub autoscaler: Autoscaler,
    pub seed: u64,
    pub phase_duration: Seconds,
    /// Replaces the default four phases when set.
    pub phases: Option<Vec<PhaseSpec>>,
    pub decision_interval: Seconds,
    pub scrape_interval: Seconds,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub initial_replicas: u32,
    pub resources: ResourceSpec,
    pub workload: WorkloadModel,
    pub reward: RewardConfig,
    pub hpa: HpaConfig,
    pub keda: KedaConfig,
    pub agent: AgentConfig,
    pub forecaster_model: Option<PathBuf>,
    pub agent_model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            autoscaler: Autoscaler::Hpa,
            seed: 42,
            phase_duration: 120,
            phases: None,
            decision_interval: DEFAULT_DECISION_INTERVAL,
            scrape_interval: DEFAULT_SCRAPE_INTERVAL,
            min_replicas: 1,
            max_replicas: 10,
            initial_replicas: 1,
            resources: ResourceSpec::default(),
            workload: WorkloadModel::default(),
            reward: RewardConfig::default(),
            hpa: HpaConfig::default(),
            keda: KedaConfig::default(),
            agent: AgentConfig::default(),
            forecaster_model: None,
            agent_model: None,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn plan(&self) -> LoadPlan {
        match &self.phases {
            Some(phases) => LoadPlan {
                phases: phases.clone(),
                seed: self.seed,
            },
            None => plan_with_duration(self.seed, self.phase_duration),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        self.plan().validate()?;
        if self.scrape_interval == 0 || self.decision_interval == 0 {
            return bad("intervals must be positive".into());
        }
        if !self.decision_interval.is_multiple_of(self.scrape_interval) {
            return bad(format!(
                "scrape interval {} does not divide decision interval {}",
                self.scrape_interval, self.decision_interval
            ));
        }
        for p in &self.plan().phases {
            if p.duration % self.decision_interval != 0 || p.duration % self.scrape_interval != 0 {
                return bad(format!(
                    "intervals do not divide phase {} ({} s)",
                    p.name, p.duration
                ));
            }
        }
        if self.min_replicas < 1 || self.min_replicas > self.max_replicas {
            return bad(format!(
                "bad replica bounds [{}, {}]",
                self.min_replicas, self.max_replicas
            ));
        }
        if !self.resources.is_valid() {
            return bad("invalid resource spec".into());
        }
        if !self.reward.is_valid() {
            return bad("invalid reward config".into());
        }
        Ok(())
    }

    /// Copies of the controller configs with the shared replica bounds.
    fn bounded(&self) -> (HpaConfig, KedaConfig, RewardConfig, AgentConfig) {
        let mut hpa = self.hpa.clone();
        hpa.min_replicas = self.min_replicas;
        hpa.max_replicas = self.max_replicas;
        let mut keda = self.keda.clone();
        keda.min_replicas = self.min_replicas;
        keda.max_replicas = self.max_replicas;
        let mut reward = self.reward.clone();
        reward.min_replicas = self.min_replicas;
        reward.max_replicas = self.max_replicas;
        let mut agent = self.agent.clone();
        agent.max_replicas = self.max_replicas;
        (hpa, keda, reward, agent)
    }

    fn cluster(&self) -> ClusterState {
        ClusterState::new(
            self.resources,
            self.workload,
            self.min_replicas,
            self.max_replicas,
            self.initial_replicas,
        )
    }
}

/// Trained parameters for the proactive autoscaler.
#[derive(Debug, Clone)]
pub struct Models {
    pub forecaster: Option<(LstmParams, Scaler)>,
    pub agent: DqnParams,
}

impl Models {
    pub fn load(forecaster: Option<&Path>, agent: &Path) -> Result<Self, HarnessError> {
        let forecaster = match forecaster {
            Some(p) => Some(store::load(p)?.to_lstm()?),
            None => None,
        };
        Ok(Self {
            forecaster,
            agent: store::load(agent)?.to_dqn()?,
        })
    }

    fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let agent = cfg
            .agent_model
            .as_deref()
            .ok_or_else(|| HarnessError::MissingModel("agent_model is not set".into()))?;
        let forecaster = cfg
            .forecaster_model
            .as_deref()
            .ok_or_else(|| HarnessError::MissingModel("forecaster_model is not set".into()))?;
        for p in [agent, forecaster] {
            if !p.exists() {
                return Err(HarnessError::MissingModel(p.display().to_string()));
            }
        }
        Self::load(Some(forecaster), agent)
    }
}

/// A replica controller invoked by the run loop.
pub(crate) trait Controller {
    fn interval(&self) -> Seconds;
    fn on_scrape(&mut self, _sample: &MetricsSample) {}
    fn decide(
        &mut self,
        t: Seconds,
        cluster: &mut ClusterState,
        store: &SeriesStore,
    ) -> Option<CycleState>;
}

struct Hpa(HpaController);

impl Controller for Hpa {
    fn interval(&self) -> Seconds {
        self.0.cfg.sync_period
    }

    fn decide(
        &mut self,
        t: Seconds,
        cluster: &mut ClusterState,
        store: &SeriesStore,
    ) -> Option<CycleState> {
        if let Some(sample) = store.latest() {
            let n = self.0.decide(t, cluster.desired_replicas, sample);
            cluster.set_desired_replicas(n);
        }
        None
    }
}

struct Keda(KedaController);

impl Controller for Keda {
    fn interval(&self) -> Seconds {
        self.0.cfg.polling_interval
    }

    fn decide(
        &mut self,
        t: Seconds,
        cluster: &mut ClusterState,
        store: &SeriesStore,
    ) -> Option<CycleState> {
        if let Some(sample) = store.latest() {
            let n = self.0.decide(t, cluster.desired_replicas, sample);
            cluster.set_desired_replicas(n);
        }
        None
    }
}

pub(crate) struct Nimbus<'a> {
    pub agent: &'a mut DqnAgent,
    pub forecaster: Option<Forecaster>,
    pub control: ControllerState,
    pub reward: RewardConfig,
    pub interval: Seconds,
}

impl Controller for Nimbus<'_> {
    fn interval(&self) -> Seconds {
        self.interval
    }

    fn on_scrape(&mut self, sample: &MetricsSample) {
        if let Some(f) = self.forecaster.as_mut() {
            f.observe(sample);
        }
    }

    fn decide(
        &mut self,
        t: Seconds,
        cluster: &mut ClusterState,
        store: &SeriesStore,
    ) -> Option<CycleState> {
        Some(run_cycle(
            CycleDeps {
                cluster,
                store,
                forecaster: self.forecaster.as_mut(),
                agent: self.agent,
                reward: &self.reward,
                validator: &RuleValidator,
                control: &mut self.control,
            },
            t,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub t: Seconds,
    pub pod_count: u32,
    pub cpu_pct: f64,
    pub mem_pct: f64,
    pub replicas: u32,
}

impl TimelinePoint {
    fn from_sample(s: &MetricsSample) -> Self {
        let (cpu_pct, mem_pct) = utilization(s);
        Self {
            t: s.t,
            pod_count: s.pod_count,
            cpu_pct,
            mem_pct,
            replicas: s.desired_replicas,
        }
    }
}

/// Raw output of one simulated run.
#[derive(Debug, Clone)]
pub(crate) struct RunTrace {
    pub samples: Vec<MetricsSample>,
    pub cycles: Vec<CycleState>,
    pub completed: u64,
    pub injected: u64,
    pub ticks_checked: u64,
}

/// Runs one plan at one-second ticks: arrivals, tick, scrape, then the
/// controller when its interval divides the clock.
pub(crate) fn simulate(
    cfg: &ExperimentConfig,
    plan: &LoadPlan,
    controller: &mut dyn Controller,
) -> Result<RunTrace, HarnessError> {
    let arrivals = generate_arrivals(plan)?;
    let mut cluster = cfg.cluster();
    let mut store = SeriesStore::new(cfg.scrape_interval);
    let mut cycles = Vec::new();
    let mut next = 0;
    let interval = controller.interval().max(1);
    let mut ticks_checked = 0;
    for now in 1..=plan.total_duration() {
        while next < arrivals.len() && arrivals[next].time < now as f64 {
            cluster.route_request(arrivals[next].to_job(&cfg.workload));
            next += 1;
        }
        cluster.tick(1);
        if !cluster.conservation_holds() {
            return Err(HarnessError::ConservationViolated(now));
        }
        ticks_checked += 1;
        if now % cfg.scrape_interval == 0 {
            let sample = scrape(&cluster);
            store
                .push(sample)
                .expect("scrapes are taken on a fixed cadence");
            controller.on_scrape(&sample);
        }
        if now % interval == 0 {
            if let Some(cs) = controller.decide(now, &mut cluster, &store) {
                cycles.push(cs);
            }
        }
    }
    Ok(RunTrace {
        samples: store.samples().to_vec(),
        cycles,
        completed: cluster.completed,
        injected: cluster.injected,
        ticks_checked,
    })
}

/// Runs an HPA baseline over `plan` and returns its scrapes.
pub fn hpa_series(
    cfg: &ExperimentConfig,
    plan: &LoadPlan,
) -> Result<Vec<MetricsSample>, HarnessError> {
    let (hpa, ..) = cfg.bounded();
    Ok(simulate(cfg, plan, &mut Hpa(HpaController::new(hpa)))?.samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub avg_replicas: f64,
    /// Pod-seconds.
    pub resource_integral: u64,
    pub scaling_events: u32,
}

/// Reduces a uniformly spaced replica series (spacing `dt`).
pub fn summarize(replicas: &[u32], dt: Seconds) -> Result<Summary, HarnessError> {
    if replicas.is_empty() {
        return Err(HarnessError::EmptyTimeline);
    }
    let integral: u64 = replicas.iter().map(|&r| r as u64 * dt).sum();
    let duration = replicas.len() as u64 * dt;
    let events = replicas.windows(2).filter(|w| w[0] != w[1]).count() as u32;
    Ok(Summary {
        avg_replicas: integral as f64 / duration as f64,
        resource_integral: integral,
        scaling_events: events,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub phase: String,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Figures reported for the original Kubernetes testbed, kept alongside each
/// report for side-by-side reading. Not used in any computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedBaseline {
    pub autoscaler: Autoscaler,
    pub avg_replicas: f64,
    pub resource_integral: Option<u64>,
    pub scaling_events: u32,
}

pub fn published_baselines() -> Vec<PublishedBaseline> {
    vec![
        PublishedBaseline {
            autoscaler: Autoscaler::Hpa,
            avg_replicas: 3.05,
            resource_integral: None,
            scaling_events: 4,
        },
        PublishedBaseline {
            autoscaler: Autoscaler::Keda,
            avg_replicas: 2.93,
            resource_integral: None,
            scaling_events: 4,
        },
        PublishedBaseline {
            autoscaler: Autoscaler::Nimbus,
            avg_replicas: 5.44,
            resource_integral: Some(2775),
            scaling_events: 8,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub autoscaler: Autoscaler,
    pub seed: u64,
    pub plan: LoadPlan,
    pub scrape_interval: Seconds,
    pub total_duration: Seconds,
    pub avg_replicas: f64,
    pub resource_integral: u64,
    pub scaling_events: u32,
    pub requests_injected: u64,
    pub requests_completed: u64,
    /// Ticks at which job conservation was verified.
    pub conservation_checks: u64,
    pub per_phase: Vec<PhaseMetrics>,
    pub timeline: Vec<TimelinePoint>,
    pub decisions: Vec<CycleState>,
    pub published_baseline: Vec<PublishedBaseline>,
}

impl RunReport {
    pub fn summary(&self) -> Summary {
        Summary {
            avg_replicas: self.avg_replicas,
            resource_integral: self.resource_integral,
            scaling_events: self.scaling_events,
        }
    }
}

fn per_phase(
    plan: &LoadPlan,
    timeline: &[TimelinePoint],
    dt: Seconds,
) -> Result<Vec<PhaseMetrics>, HarnessError> {
    plan.phases
        .iter()
        .zip(plan.windows())
        .map(|(p, (start, end))| {
            let r: Vec<u32> = timeline
                .iter()
                .filter(|x| x.t > start && x.t <= end)
                .map(|x| x.replicas)
                .collect();
            Ok(PhaseMetrics {
                phase: p.name.clone(),
                summary: summarize(&r, dt)?,
            })
        })
        .collect()
}

fn build_report(
    cfg: &ExperimentConfig,
    plan: &LoadPlan,
    trace: RunTrace,
) -> Result<RunReport, HarnessError> {
    let timeline: Vec<TimelinePoint> = trace
        .samples
        .iter()
        .map(TimelinePoint::from_sample)
        .collect();
    let replicas: Vec<u32> = timeline.iter().map(|p| p.replicas).collect();
    let s = summarize(&replicas, cfg.scrape_interval)?;
    Ok(RunReport {
        autoscaler: cfg.autoscaler,
        seed: cfg.seed,
        plan: plan.clone(),
        scrape_interval: cfg.scrape_interval,
        total_duration: plan.total_duration(),
        avg_replicas: s.avg_replicas,
        resource_integral: s.resource_integral,
        scaling_events: s.scaling_events,
        requests_injected: trace.injected,
        requests_completed: trace.completed,
        conservation_checks: trace.ticks_checked,
        per_phase: per_phase(plan, &timeline, cfg.scrape_interval)?,
        timeline,
        decisions: trace.cycles,
        published_baseline: published_baselines(),
    })
}

/// Runs the configured experiment, loading models from the configured paths
/// when the autoscaler needs them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let models = match cfg.autoscaler {
        Autoscaler::Nimbus => Some(Models::from_config(cfg)?),
        _ => None,
    };
    run_with_models(cfg, models.as_ref())
}

/// Like [`run_experiment`] with models supplied in memory.
pub fn run_with_models(
    cfg: &ExperimentConfig,
    models: Option<&Models>,
) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let plan = cfg.plan();
    let (hpa, keda, reward, agent_cfg) = cfg.bounded();
    let trace = match cfg.autoscaler {
        Autoscaler::Hpa => simulate(cfg, &plan, &mut Hpa(HpaController::new(hpa)))?,
        Autoscaler::Keda => simulate(cfg, &plan, &mut Keda(KedaController::new(keda)))?,
        Autoscaler::Nimbus => {
            let models = models
                .ok_or_else(|| HarnessError::MissingModel("nimbus needs trained models".into()))?;
            let mut agent = DqnAgent::with_params(agent_cfg, models.agent.clone());
            let mut nimbus = Nimbus {
                agent: &mut agent,
                forecaster: models
                    .forecaster
                    .clone()
                    .map(|(p, s)| Forecaster::new(p, s)),
                control: ControllerState::new(false, plan.total_duration()),
                reward,
                interval: cfg.decision_interval,
            };
            simulate(cfg, &plan, &mut nimbus)?
        }
    };
    build_report(cfg, &plan, trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub autoscaler: Autoscaler,
    pub avg_replicas: f64,
    pub resource_integral: u64,
    pub scaling_events: u32,
    /// Difference from the mean of the other rows.
    pub delta_avg_replicas: f64,
    pub delta_resource_integral: f64,
    pub delta_scaling_events: f64,
    pub highest_avg_replicas: bool,
    pub largest_resource_integral: bool,
    pub most_scaling_events: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, a: Autoscaler) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.autoscaler == a)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>12} {:>10} {:>8} {:>10} {:>10} {:>8}",
            "scaler", "avg_replicas", "pod_s", "events", "d_avg", "d_pod_s", "d_events"
        );
        for r in &self.rows {
            let flag = |b: bool| if b { "*" } else { " " };
            let _ = writeln!(
                out,
                "{:<8} {:>11.2}{} {:>9}{} {:>7}{} {:>+10.2} {:>+10.1} {:>+8.2}",
                r.autoscaler.name(),
                r.avg_replicas,
                flag(r.highest_avg_replicas),
                r.resource_integral,
                flag(r.largest_resource_integral),
                r.scaling_events,
                flag(r.most_scaling_events),
                r.delta_avg_replicas,
                r.delta_resource_integral,
                r.delta_scaling_events,
            );
        }
        out
    }
}

/// Side-by-side metrics in [`Autoscaler`] declaration order. Flags mark
/// every row that attains the column maximum.
pub fn compare(reports: &[RunReport]) -> Result<ComparisonTable, HarnessError> {
    if reports.len() < 2 {
        return Err(HarnessError::NotEnoughReports(reports.len()));
    }
    if reports.iter().any(|r| r.plan != reports[0].plan) {
        return Err(HarnessError::MismatchedPlans);
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.autoscaler);
    let n = sorted.len() as f64;
    let others_mean = |f: &dyn Fn(&RunReport) -> f64, me: &RunReport| {
        let total: f64 = sorted.iter().map(|r| f(r)).sum();
        f(me) - (total - f(me)) / (n - 1.0)
    };
    let max_avg = sorted
        .iter()
        .map(|r| r.avg_replicas)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_int = sorted
        .iter()
        .map(|r| r.resource_integral)
        .max()
        .unwrap_or(0);
    let max_ev = sorted.iter().map(|r| r.scaling_events).max().unwrap_or(0);
    let rows = sorted
        .iter()
        .map(|r| ComparisonRow {
            autoscaler: r.autoscaler,
            avg_replicas: r.avg_replicas,
            resource_integral: r.resource_integral,
            scaling_events: r.scaling_events,
            delta_avg_replicas: others_mean(&|x| x.avg_replicas, r),
            delta_resource_integral: others_mean(&|x| x.resource_integral as f64, r),
            delta_scaling_events: others_mean(&|x| x.scaling_events as f64, r),
            highest_avg_replicas: r.avg_replicas == max_avg,
            largest_resource_integral: r.resource_integral == max_int,
            most_scaling_events: r.scaling_events == max_ev,
        })
        .collect();
    Ok(ComparisonTable { rows })
}

pub fn timeline_csv(report: &RunReport) -> String {
    let mut out = String::from("t,pod_count,cpu_pct,mem_pct,replicas\n");
    for p in &report.timeline {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.t, p.pod_count, p.cpu_pct, p.mem_pct, p.replicas
        );
    }
    out
}

pub fn rewards_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "t,r_cpu,r_mem,r_current,r_forecast,w_current,w_forecast,r_combined,r_stability,r_action_bonus,r_cost_penalty,r_total\n",
    );
    for cs in &report.decisions {
        if let Some(r) = &cs.reward {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                cs.t,
                r.r_cpu,
                r.r_mem,
                r.r_current,
                r.r_forecast,
                r.w_current,
                r.w_forecast,
                r.r_combined,
                r.r_stability,
                r.r_action_bonus,
                r.r_cost_penalty,
                r.r_total
            );
        }
    }
    out
}

pub fn decisions_jsonl(report: &RunReport) -> Result<String, HarnessError> {
    let mut out = String::new();
    for cs in &report.decisions {
        out.push_str(&serde_json::to_string(cs)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `report.json`, `timeline.csv`, `decisions.jsonl` and `rewards.csv`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    fs::write(dir.join("timeline.csv"), timeline_csv(report))?;
    fs::write(dir.join("decisions.jsonl"), decisions_jsonl(report)?)?;
    fs::write(dir.join("rewards.csv"), rewards_csv(report))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RunReport, HarnessError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
