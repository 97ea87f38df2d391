//! Seeded open-loop traffic for the four-phase load experiment.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Each
//! `(phase, user)` pair draws from its own stream: the generator is seeded
//! with `seed_from_u64(plan.seed)` and then switched to stream
//! `phase_index * 1024 + user_index`, so adding a phase or a user never
//! perturbs the timestamps of the others.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simcore::{RequestJob, Seconds, WorkloadModel};

pub const DEFAULT_PHASE_DURATION: Seconds = 120;

#[derive(Debug, Error, PartialEq)]
pub enum LoadError {
    #[error("phase {0}: need total_requests >= concurrent_users >= 1")]
    BadCounts(String),
    #[error("phase {0}: duration must be positive")]
    ZeroDuration(String),
    #[error("load plan has no phases")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub name: String,
    pub concurrent_users: u32,
    pub total_requests: u32,
    pub duration: Seconds,
}

impl PhaseSpec {
    pub fn new(name: &str, users: u32, requests: u32, duration: Seconds) -> Self {
        Self {
            name: name.to_string(),
            concurrent_users: users,
            total_requests: requests,
            duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadPlan {
    pub phases: Vec<PhaseSpec>,
    pub seed: u64,
}

/// Ramp-up, sustained, peak and cooldown phases of 120 s each.
pub fn default_plan(seed: u64) -> LoadPlan {
    plan_with_duration(seed, DEFAULT_PHASE_DURATION)
}

pub fn plan_with_duration(seed: u64, phase_duration: Seconds) -> LoadPlan {
    LoadPlan {
        phases: vec![
            PhaseSpec::new("ramp-up", 4, 40, phase_duration),
            PhaseSpec::new("sustained", 8, 60, phase_duration),
            PhaseSpec::new("peak", 15, 90, phase_duration),
            PhaseSpec::new("cooldown", 3, 30, phase_duration),
        ],
        seed,
    }
}

impl LoadPlan {
    pub fn validate(&self) -> Result<(), LoadError> {
        if self.phases.is_empty() {
            return Err(LoadError::Empty);
        }
        for p in &self.phases {
            if p.concurrent_users < 1 || p.total_requests < p.concurrent_users {
                return Err(LoadError::BadCounts(p.name.clone()));
            }
            if p.duration == 0 {
                return Err(LoadError::ZeroDuration(p.name.clone()));
            }
        }
        Ok(())
    }

    /// `[start, end)` of every phase, cumulative and gap-free.
    pub fn windows(&self) -> Vec<(Seconds, Seconds)> {
        let mut start = 0;
        self.phases
            .iter()
            .map(|p| {
                let w = (start, start + p.duration);
                start += p.duration;
                w
            })
            .collect()
    }

    pub fn total_duration(&self) -> Seconds {
        self.phases.iter().map(|p| p.duration).sum()
    }

    pub fn total_requests(&self) -> u64 {
        self.phases.iter().map(|p| p.total_requests as u64).sum()
    }

    /// Index of the phase containing time `t`, if any.
    pub fn phase_at(&self, t: f64) -> Option<usize> {
        self.windows()
            .iter()
            .position(|&(s, e)| t >= s as f64 && t < e as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time: f64,
    pub id: u64,
    pub phase: usize,
    pub user: u32,
}

impl Arrival {
    pub fn to_job(&self, workload: &WorkloadModel) -> RequestJob {
        RequestJob {
            id: self.id,
            arrival: self.time,
            remaining_work: workload.work_per_request,
            mem_footprint: workload.mem_per_request,
        }
    }
}

/// Expands a plan into a time-ordered arrival list.
///
/// Within a phase, request `k` belongs to user `k % concurrent_users`. A user
/// with `n` requests fires them at the centres of `n` equal slots spanning the
/// phase, each displaced by jitter drawn uniformly from the open interval
/// `(-slot/2, +slot/2)`.
pub fn generate_arrivals(plan: &LoadPlan) -> Result<Vec<Arrival>, LoadError> {
    plan.validate()?;
    let mut out = Vec::with_capacity(plan.total_requests() as usize);
    for (pi, (phase, (start, _))) in plan.phases.iter().zip(plan.windows()).enumerate() {
        let users = phase.concurrent_users;
        for user in 0..users {
            let share = (phase.total_requests / users
                + u32::from(user < phase.total_requests % users)) as usize;
            let slot = phase.duration as f64 / share as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            rng.set_stream(pi as u64 * 1024 + user as u64);
            for i in 0..share {
                let u: f64 = Open01.sample(&mut rng);
                let centre = start as f64 + (i as f64 + 0.5) * slot;
                out.push(Arrival {
                    time: centre + (u - 0.5) * slot,
                    id: 0,
                    phase: pi,
                    user,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.phase.cmp(&b.phase))
            .then(a.user.cmp(&b.user))
    });
    for (i, a) in out.iter_mut().enumerate() {
        a.id = i as u64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_phase_counts(plan: &LoadPlan, arrivals: &[Arrival]) -> Vec<usize> {
        plan.windows()
            .iter()
            .map(|&(s, e)| {
                arrivals
                    .iter()
                    .filter(|a| a.time >= s as f64 && a.time < e as f64)
                    .count()
            })
            .collect()
    }

    #[test]
    fn default_plan_has_four_phases_and_220_requests() {
        let plan = default_plan(7);
        assert_eq!(plan.phases.len(), 4);
        assert_eq!(plan.total_requests(), 220);
        assert_eq!(plan.phases[2].concurrent_users, 15);
        assert_eq!(plan.phases[2].total_requests, 90);
        assert_eq!(plan.total_duration(), 480);
        assert_eq!(default_plan(7), default_plan(7));
    }

    #[test]
    fn windows_are_gap_free() {
        let w = default_plan(0).windows();
        assert_eq!(w, vec![(0, 120), (120, 240), (240, 360), (360, 480)]);
    }

    #[test]
    fn same_seed_same_arrivals() {
        let plan = default_plan(42);
        assert_eq!(
            generate_arrivals(&plan).unwrap(),
            generate_arrivals(&plan).unwrap()
        );
    }

    #[test]
    fn phase_counts_match_plan() {
        let plan = default_plan(42);
        let arrivals = generate_arrivals(&plan).unwrap();
        assert_eq!(per_phase_counts(&plan, &arrivals), vec![40, 60, 90, 30]);
    }

    #[test]
    fn different_seeds_move_timestamps_not_counts() {
        let a = default_plan(1);
        let b = default_plan(2);
        let xa = generate_arrivals(&a).unwrap();
        let xb = generate_arrivals(&b).unwrap();
        assert_eq!(per_phase_counts(&a, &xa), per_phase_counts(&b, &xb));
        assert_ne!(xa, xb);
    }

    #[test]
    fn uneven_split_gives_extra_requests_to_first_users() {
        let plan = LoadPlan {
            phases: vec![PhaseSpec::new("odd", 3, 10, 60)],
            seed: 3,
        };
        let arrivals = generate_arrivals(&plan).unwrap();
        let per_user: Vec<_> = (0..3)
            .map(|u| arrivals.iter().filter(|a| a.user == u).count())
            .collect();
        assert_eq!(per_user, vec![4, 3, 3]);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let mut plan = default_plan(0);
        plan.phases[1].total_requests = 3;
        assert_eq!(
            generate_arrivals(&plan),
            Err(LoadError::BadCounts("sustained".into()))
        );
        plan.phases[1] = PhaseSpec::new("x", 1, 1, 0);
        assert!(matches!(plan.validate(), Err(LoadError::ZeroDuration(_))));
        assert_eq!(
            LoadPlan {
                phases: vec![],
                seed: 0
            }
            .validate(),
            Err(LoadError::Empty)
        );
    }
}
