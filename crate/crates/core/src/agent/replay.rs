use std::collections::VecDeque;

use rand::Rng;

use super::{AgentError, Experience};

pub const DEFAULT_CAPACITY: usize = 10_000;

/// Fixed-capacity FIFO of transitions; pushing into a full buffer evicts the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
    inserted: u64,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(DEFAULT_CAPACITY)),
            capacity,
            inserted: 0,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
        self.inserted += 1;
    }

    /// Uniform sample of `batch` distinct entries.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<Experience>, AgentError> {
        if self.items.len() < batch {
            return Err(AgentError::InsufficientExperiences {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes over the buffer's lifetime, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{ScalingAction, StateVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(i: usize) -> Experience {
        let s = StateVector::new(0.0, 0.0, 0.0, 1.0);
        Experience {
            state: s,
            action: ScalingAction::KeepSame,
            reward: i as f64,
            next_state: s,
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_when_full() {
        let mut b = ReplayBuffer::new(10_000);
        for i in 0..10_001 {
            b.push(exp(i));
        }
        assert_eq!(b.len(), 10_000);
        assert_eq!(b.inserted(), 10_001);
        assert_eq!(b.iter().next().unwrap().reward, 1.0);
        assert!(b.iter().all(|e| e.reward != 0.0));
    }

    #[test]
    fn fifo_order_is_exact() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..7 {
            b.push(exp(i));
        }
        let r: Vec<_> = b.iter().map(|e| e.reward).collect();
        assert_eq!(r, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn sampling_requires_enough_items() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..31 {
            b.push(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            b.sample(32, &mut rng).unwrap_err(),
            AgentError::InsufficientExperiences { have: 31, need: 32 }
        );
        let s = b.sample(31, &mut rng).unwrap();
        let mut seen: Vec<_> = s.iter().map(|e| e.reward as usize).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 31);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = [0u32; 100];
        let draws = 10_000;
        for _ in 0..draws {
            let e = &b.sample(1, &mut rng).unwrap()[0];
            counts[e.reward as usize] += 1;
        }
        let expected = draws as f64 / 100.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square, 99 dof: the 0.999 quantile is about 148.2
        assert!(chi2 < 148.2, "chi2 = {chi2}");
    }
}
