//! Discrete-time model of one Kubernetes deployment running a deterministic
//! consumer application.
//!
//! The simulator advances in fixed one-second ticks. Every request is a
//! [`RequestJob`] carrying a fixed amount of CPU work and a fixed memory
//! footprint; pods share their CPU limit equally among in-flight jobs
//! (processor sharing) and admit new jobs only while their memory limit has
//! headroom. Replica changes go through [`ClusterState::set_desired_replicas`],
//! which models cold starts (Pending) and graceful shutdown (Terminating).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Simulation clock in whole seconds.
pub type Seconds = u64;

/// Per-pod resource requests and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    /// CPU request in millicores.
    pub cpu_request: f64,
    /// CPU limit in millicores.
    pub cpu_limit: f64,
    /// Memory request in MiB.
    pub mem_request: f64,
    /// Memory limit in MiB.
    pub mem_limit: f64,
}

impl Default for ResourceSpec {
    fn default() -> Self {
        Self {
            cpu_request: 600.0,
            cpu_limit: 1000.0,
            mem_request: 512.0,
            mem_limit: 1024.0,
        }
    }
}

impl ResourceSpec {
    pub fn is_valid(&self) -> bool {
        self.cpu_request > 0.0
            && self.mem_request > 0.0
            && self.cpu_request <= self.cpu_limit
            && self.mem_request <= self.mem_limit
    }
}

/// Cost model of the consumer application and pod lifecycle timings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadModel {
    /// CPU work per request in millicore-seconds.
    pub work_per_request: f64,
    /// Memory held by a request while in flight, MiB.
    pub mem_per_request: f64,
    /// Resident memory of an idle pod, MiB.
    pub base_mem: f64,
    /// Seconds a Pending pod needs before it becomes Running.
    pub startup_delay: Seconds,
    /// Seconds a Terminating pod lingers before removal.
    pub grace_period: Seconds,
    /// Number of ticks averaged when a pod's CPU usage is scraped.
    pub cpu_rate_window: usize,
}

impl Default for WorkloadModel {
    fn default() -> Self {
        Self {
            work_per_request: 3600.0,
            mem_per_request: 40.0,
            base_mem: 150.0,
            startup_delay: 10,
            grace_period: 5,
            cpu_rate_window: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestJob {
    pub id: u64,
    /// Arrival time in seconds (may be fractional).
    pub arrival: f64,
    /// Outstanding CPU work, millicore-seconds.
    pub remaining_work: f64,
    pub mem_footprint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PodPhase {
    Pending,
    Running,
    Terminating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodState {
    pub pod_id: u64,
    pub phase: PodPhase,
    pub phase_since: Seconds,
    pub in_flight: Vec<RequestJob>,
    pub base_mem: f64,
    /// Millicores consumed during the most recent tick.
    pub last_cpu: f64,
    /// Per-tick CPU usage over the trailing rate window, oldest first.
    cpu_history: VecDeque<f64>,
}

impl PodState {
    fn new(pod_id: u64, phase: PodPhase, since: Seconds, base_mem: f64) -> Self {
        Self {
            pod_id,
            phase,
            phase_since: since,
            in_flight: Vec::new(),
            base_mem,
            last_cpu: 0.0,
            cpu_history: VecDeque::new(),
        }
    }

    pub fn mem_used(&self) -> f64 {
        self.base_mem + self.in_flight.iter().map(|j| j.mem_footprint).sum::<f64>()
    }

    /// Mean CPU usage over the trailing rate window, like a Prometheus
    /// `rate()` over a cumulative CPU-seconds counter.
    pub fn cpu_rate(&self) -> f64 {
        if self.phase != PodPhase::Running || self.cpu_history.is_empty() {
            return 0.0;
        }
        self.cpu_history.iter().sum::<f64>() / self.cpu_history.len() as f64
    }
}

/// Instantaneous usage of a pod: `(cpu_millicores, mem_mib)`.
///
/// Pending and Terminating pods report no CPU and only their base memory.
pub fn pod_usage(pod: &PodState) -> (f64, f64) {
    match pod.phase {
        PodPhase::Running => (pod.last_cpu, pod.mem_used()),
        PodPhase::Pending | PodPhase::Terminating => (0.0, pod.base_mem),
    }
}

/// The simulated deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub clock: Seconds,
    pub pods: Vec<PodState>,
    pub desired_replicas: u32,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub next_pod_id: u64,
    pub pending_queue: VecDeque<RequestJob>,
    pub completed: u64,
    pub injected: u64,
    pub resources: ResourceSpec,
    pub workload: WorkloadModel,
}

impl ClusterState {
    /// Creates a cluster at `clock = 0` with `initial` pods already Running.
    pub fn new(
        resources: ResourceSpec,
        workload: WorkloadModel,
        min_replicas: u32,
        max_replicas: u32,
        initial: u32,
    ) -> Self {
        let initial = initial.clamp(min_replicas, max_replicas);
        let pods = (1..=initial as u64)
            .map(|id| PodState::new(id, PodPhase::Running, 0, workload.base_mem))
            .collect();
        Self {
            clock: 0,
            pods,
            desired_replicas: initial,
            min_replicas,
            max_replicas,
            next_pod_id: initial as u64 + 1,
            pending_queue: VecDeque::new(),
            completed: 0,
            injected: 0,
            resources,
            workload,
        }
    }

    /// Builds a job for the configured workload model.
    pub fn make_job(&self, id: u64, arrival: f64) -> RequestJob {
        RequestJob {
            id,
            arrival,
            remaining_work: self.workload.work_per_request,
            mem_footprint: self.workload.mem_per_request,
        }
    }

    pub fn running_pods(&self) -> impl Iterator<Item = &PodState> {
        self.pods.iter().filter(|p| p.phase == PodPhase::Running)
    }

    pub fn running_count(&self) -> u32 {
        self.running_pods().count() as u32
    }

    /// Pods that are Pending or Running.
    pub fn active_count(&self) -> u32 {
        self.pods
            .iter()
            .filter(|p| p.phase != PodPhase::Terminating)
            .count() as u32
    }

    pub fn jobs_in_flight(&self) -> u64 {
        self.pods.iter().map(|p| p.in_flight.len() as u64).sum()
    }

    /// `injected = completed + in_flight + queued`.
    pub fn conservation_holds(&self) -> bool {
        self.injected == self.completed + self.jobs_in_flight() + self.pending_queue.len() as u64
    }

    pub fn set_desired_replicas(&mut self, n: u32) {
        let n = n.clamp(self.min_replicas, self.max_replicas);
        self.desired_replicas = n;
        let active = self.active_count();
        if n > active {
            for _ in 0..(n - active) {
                let pod = PodState::new(
                    self.next_pod_id,
                    PodPhase::Pending,
                    self.clock,
                    self.workload.base_mem,
                );
                self.next_pod_id += 1;
                self.pods.push(pod);
            }
        } else if n < active {
            let mut victims: Vec<usize> = self
                .pods
                .iter()
                .enumerate()
                .filter(|(_, p)| p.phase != PodPhase::Terminating)
                .map(|(i, _)| i)
                .collect();
            // newest first
            victims.sort_by_key(|&i| std::cmp::Reverse(self.pods[i].pod_id));
            for &i in victims.iter().take((active - n) as usize) {
                let pod = &mut self.pods[i];
                pod.phase = PodPhase::Terminating;
                pod.phase_since = self.clock;
                pod.last_cpu = 0.0;
                pod.cpu_history.clear();
                self.pending_queue.extend(pod.in_flight.drain(..));
            }
        }
    }

    /// Registers a newly arrived request and routes it.
    pub fn route_request(&mut self, job: RequestJob) {
        self.injected += 1;
        if let Err(job) = self.try_place(job) {
            self.pending_queue.push_back(job);
        }
    }

    /// Least-loaded Running pod with memory headroom; ties go to the lowest id.
    fn try_place(&mut self, job: RequestJob) -> Result<(), RequestJob> {
        let limit = self.resources.mem_limit;
        let target = self
            .pods
            .iter_mut()
            .filter(|p| p.phase == PodPhase::Running)
            .filter(|p| p.mem_used() + job.mem_footprint <= limit)
            .min_by_key(|p| (p.in_flight.len(), p.pod_id));
        match target {
            Some(pod) => {
                pod.in_flight.push(job);
                Ok(())
            }
            None => Err(job),
        }
    }

    /// Advances the simulation by `dt` one-second steps.
    pub fn tick(&mut self, dt: Seconds) {
        for _ in 0..dt {
            self.step();
        }
    }

    fn step(&mut self) {
        let clock = self.clock;
        let startup = self.workload.startup_delay;
        let grace = self.workload.grace_period;

        for pod in &mut self.pods {
            if pod.phase == PodPhase::Pending && clock - pod.phase_since >= startup {
                pod.phase = PodPhase::Running;
                pod.phase_since = clock;
            }
        }
        self.pods
            .retain(|p| !(p.phase == PodPhase::Terminating && clock - p.phase_since >= grace));

        let capacity = self.resources.cpu_limit;
        let window = self.workload.cpu_rate_window.max(1);
        for pod in self
            .pods
            .iter_mut()
            .filter(|p| p.phase == PodPhase::Running)
        {
            let used = share_cpu(&mut pod.in_flight, capacity);
            let before = pod.in_flight.len();
            pod.in_flight.retain(|j| j.remaining_work > 0.0);
            self.completed += (before - pod.in_flight.len()) as u64;
            pod.last_cpu = used;
            pod.cpu_history.push_back(used);
            while pod.cpu_history.len() > window {
                pod.cpu_history.pop_front();
            }
        }

        let queued = std::mem::take(&mut self.pending_queue);
        for job in queued {
            if let Err(job) = self.try_place(job) {
                self.pending_queue.push_back(job);
            }
        }

        self.clock += 1;
        debug_assert!(self.conservation_holds(), "job conservation violated");
    }
}

/// Splits `capacity` millicores for one second across `jobs` by
/// water-filling: every job gets an equal share, and jobs needing less than
/// their share release the surplus to the rest. Returns millicores used.
fn share_cpu(jobs: &mut [RequestJob], capacity: f64) -> f64 {
    if jobs.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| {
        jobs[a]
            .remaining_work
            .total_cmp(&jobs[b].remaining_work)
            .then(a.cmp(&b))
    });
    let mut left = capacity;
    let mut used = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let share = left / (order.len() - k) as f64;
        let job = &mut jobs[i];
        let grant = job.remaining_work.min(share);
        job.remaining_work -= grant;
        if job.remaining_work < 1e-9 {
            job.remaining_work = 0.0;
        }
        left -= grant;
        used += grant;
    }
    used
}
