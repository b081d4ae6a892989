use rand::Rng;

use crate::obs::GraphObservation;
use crate::{Error, Result};

/// One stored step `(s, a, r, s', done)`. `obs` and `next_obs` may have a
/// different node count when CAVs spawn or exit in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: GraphObservation,
    pub actions: Vec<f64>,
    pub reward: f64,
    pub next_obs: GraphObservation,
    pub done: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten once
/// full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("train.buffer_capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
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

    /// Stores `t`. Observations without CAVs carry no decision and are
    /// rejected.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.is_empty() {
            return Err(Error::NoCavs);
        }
        if t.actions.len() != t.obs.node_count() {
            return Err(Error::ActionLength {
                expected: t.obs.node_count(),
                got: t.actions.len(),
            });
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Indices of a uniform minibatch drawn without replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch > self.items.len() || batch == 0 {
            return Err(Error::BufferUnderfull {
                size: self.items.len(),
                needed: batch.max(1),
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }
}
