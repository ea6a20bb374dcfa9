use std::sync::Mutex;

use rand::seq::index;
use rand::Rng;

/// One step of experience. `action` indexes the discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `batch` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        assert!(batch <= self.items.len(), "minibatch larger than buffer");
        index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

/// A replay buffer behind a lock, for rollouts produced on several threads.
#[derive(Debug)]
pub struct SharedReplayBuffer {
    inner: Mutex<ReplayBuffer>,
}

impl SharedReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        SharedReplayBuffer {
            inner: Mutex::new(ReplayBuffer::new(capacity)),
        }
    }

    pub fn push(&self, t: Transition) {
        self.inner.lock().expect("replay lock poisoned").push(t);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("replay lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<Transition> {
        let guard = self.inner.lock().expect("replay lock poisoned");
        guard.sample(batch, rng).into_iter().cloned().collect()
    }
}
