use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::AgentError;
use crate::rng::GameRng;

/// Fixed-capacity FIFO replay memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> ReplayBuffer<T> {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `batch` distinct entries chosen uniformly.
    pub fn sample(&self, batch: usize, rng: &mut GameRng) -> Result<Vec<&T>, AgentError> {
        if self.items.len() < batch {
            return Err(AgentError::InsufficientData {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

/// Uniform reservoir (Algorithm R): after `n` insertions each item is
/// retained with probability `capacity / n`.
#[derive(Clone, Debug)]
pub struct ReservoirBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    seen: u64,
}

impl<T> ReservoirBuffer<T> {
    pub fn new(capacity: usize) -> ReservoirBuffer<T> {
        assert!(capacity > 0, "reservoir capacity must be positive");
        ReservoirBuffer {
            items: Vec::new(),
            capacity,
            seen: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn push(&mut self, item: T, rng: &mut GameRng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn sample(&self, batch: usize, rng: &mut GameRng) -> Result<Vec<&T>, AgentError> {
        if self.items.len() < batch {
            return Err(AgentError::InsufficientData {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
