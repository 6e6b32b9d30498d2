use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
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

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `min(batch, len)` distinct transitions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<&Transition> {
        let amount = batch.min(self.items.len());
        index::sample(rng, self.items.len(), amount).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn t(r: f64) -> Transition {
        Transition { state: vec![r], action: vec![0.0], reward: r, next_state: vec![r], done: false }
    }

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..8 {
            b.push(t(i as f64));
            assert!(b.len() <= 5);
        }
        let rewards: Vec<f64> = b.iter().map(|x| x.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn batch_has_no_repeats() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(t(i as f64));
        }
        let mut rng = RngStream::new(1, 0).generator();
        for _ in 0..50 {
            let s = b.sample(&mut rng, 64);
            let mut r: Vec<i64> = s.iter().map(|x| x.reward as i64).collect();
            r.sort();
            r.dedup();
            assert_eq!(r.len(), 64);
        }
        assert_eq!(b.sample(&mut rng, 500).len(), 100);
    }
}
