use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

/// Shared, immutable feature vector. Candidate lists of consecutive
/// transitions point at the same action vectors.
pub type Features = Arc<[f64]>;

/// One scheduling step: the buffer state, the executed query, its hit
/// ratio, the state after execution and the queries still waiting.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Features,
    pub action: Features,
    pub reward: f64,
    pub next_state: Features,
    pub next_candidates: Vec<Features>,
}

impl Transition {
    /// Terminal exactly when nothing is left to schedule.
    pub fn terminal(&self) -> bool {
        self.next_candidates.is_empty()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub(crate) transition: Transition,
    /// Bellman target computed against target-network generation `.0`.
    pub(crate) target: Option<(u64, f64)>,
}

/// Fixed-capacity ring of transitions; the oldest entry is dropped first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: VecDeque<Slot>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            slots: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(Slot {
            transition,
            target: None,
        });
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.slots.get(i).map(|s| &s.transition)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.slots.iter().map(|s| &s.transition)
    }

    /// Up to `n` distinct indexes drawn uniformly.
    pub fn sample_indexes<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.slots.len(), n.min(self.slots.len())).into_vec()
    }

    pub(crate) fn slot_mut(&mut self, i: usize) -> &mut Slot {
        &mut self.slots[i]
    }
}
