//! Prometheus-style scraping and an append-only series store.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{ClusterState, Seconds};

pub const DEFAULT_SCRAPE_INTERVAL: Seconds = 15;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need {needed} samples at or before t={t}, have {have}")]
    InsufficientHistory {
        needed: usize,
        have: usize,
        t: Seconds,
    },
    #[error("sample at t={got} breaks the {interval}s cadence (previous t={prev})")]
    OffCadence {
        prev: Seconds,
        got: Seconds,
        interval: Seconds,
    },
}

/// One scrape of the deployment. Totals cover Running pods only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub t: Seconds,
    pub pod_count: u32,
    pub total_cpu_millicores: f64,
    pub total_mem_mib: f64,
    pub total_cpu_limit: f64,
    pub total_mem_limit: f64,
    /// Replica target of the deployment at scrape time.
    pub desired_replicas: u32,
}

/// Aggregates CPU rate and memory over Running pods.
pub fn scrape(cluster: &ClusterState) -> MetricsSample {
    let (mut cpu, mut mem, mut n) = (0.0, 0.0, 0u32);
    for pod in cluster.running_pods() {
        cpu += pod.cpu_rate();
        mem += pod.mem_used();
        n += 1;
    }
    MetricsSample {
        t: cluster.clock,
        pod_count: n,
        total_cpu_millicores: cpu,
        total_mem_mib: mem,
        total_cpu_limit: n as f64 * cluster.resources.cpu_limit,
        total_mem_limit: n as f64 * cluster.resources.mem_limit,
        desired_replicas: cluster.desired_replicas,
    }
}

/// `(cpu_pct, mem_pct)` relative to the summed limits; `(0, 0)` without pods.
pub fn utilization(sample: &MetricsSample) -> (f64, f64) {
    if sample.pod_count == 0 || sample.total_cpu_limit <= 0.0 || sample.total_mem_limit <= 0.0 {
        return (0.0, 0.0);
    }
    (
        sample.total_cpu_millicores / sample.total_cpu_limit * 100.0,
        sample.total_mem_mib / sample.total_mem_limit * 100.0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStore {
    samples: Vec<MetricsSample>,
    pub scrape_interval: Seconds,
}

impl Default for SeriesStore {
    fn default() -> Self {
        Self::new(DEFAULT_SCRAPE_INTERVAL)
    }
}

impl SeriesStore {
    pub fn new(scrape_interval: Seconds) -> Self {
        Self {
            samples: Vec::new(),
            scrape_interval,
        }
    }

    pub fn push(&mut self, sample: MetricsSample) -> Result<(), MetricsError> {
        if let Some(prev) = self.samples.last() {
            if sample.t != prev.t + self.scrape_interval {
                return Err(MetricsError::OffCadence {
                    prev: prev.t,
                    got: sample.t,
                    interval: self.scrape_interval,
                });
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[MetricsSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn latest(&self) -> Option<&MetricsSample> {
        self.samples.last()
    }

    /// The last `lookback` samples ending at the latest sample `<= t`,
    /// oldest first.
    pub fn window(&self, t: Seconds, lookback: usize) -> Result<&[MetricsSample], MetricsError> {
        let end = self.samples.partition_point(|s| s.t <= t);
        if end < lookback {
            return Err(MetricsError::InsufficientHistory {
                needed: lookback,
                have: end,
                t,
            });
        }
        Ok(&self.samples[end - lookback..end])
    }
}
