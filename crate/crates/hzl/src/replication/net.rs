//! In-memory discrete-event network simulator.
//!
//! Messages sent at tick T are delivered no earlier than T+1, plus a
//! seeded uniform delay and any sender-fault delay. Drops and delays
//! come from a ChaCha stream seeded by the topology file, so the same
//! seed always yields the same delivery schedule. Self-addressed
//! messages never drop and never partition; they model a node's
//! internal pipe.

use std::collections::BTreeMap;

use rand_core::{Rng, SeedableRng};

use super::config::NetConfig;

#[derive(Debug, Clone)]
pub struct Delivery<M> {
    pub from: usize,
    pub to: usize,
    pub msg: M,
}

#[derive(Debug)]
pub struct SimNet<M> {
    cfg: NetConfig,
    rng: rand_chacha::ChaCha8Rng,
    queue: BTreeMap<(u64, u64), Delivery<M>>,
    next_id: u64,
    pub now: u64,
    pub dropped: u64,
    pub partitioned: u64,
}

impl<M> SimNet<M> {
    pub fn new(cfg: NetConfig) -> Self {
        let rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        SimNet {
            cfg,
            rng,
            queue: BTreeMap::new(),
            next_id: 0,
            now: 0,
            dropped: 0,
            partitioned: 0,
        }
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    fn sample_delay(&mut self) -> u64 {
        let (min, max) = (self.cfg.delay_min, self.cfg.delay_max);
        if max == min {
            return min;
        }
        min + self.rng.next_u64() % (max - min + 1)
    }

    fn sample_drop(&mut self, from: usize, to: usize) -> bool {
        let rate = self
            .cfg
            .link_drop
            .get(&(from, to))
            .copied()
            .unwrap_or(self.cfg.drop_rate);
        if rate <= 0.0 {
            return false;
        }
        (self.rng.next_u64() as f64 / u64::MAX as f64) < rate
    }

    pub fn send(&mut self, from: usize, to: usize, msg: M, extra_delay: u64) {
        if from != to {
            if self
                .cfg
                .partitions
                .iter()
                .any(|p| p.blocks(from, to, self.now))
            {
                self.partitioned += 1;
                return;
            }
            if self.sample_drop(from, to) {
                self.dropped += 1;
                return;
            }
        }
        let delay = if from == to { 0 } else { self.sample_delay() };
        let deliver_at = self.now + 1 + delay + extra_delay;
        let id = self.next_id;
        self.next_id += 1;
        self.queue
            .insert((deliver_at, id), Delivery { from, to, msg });
    }

    /// Pop every delivery due at or before the given tick, in
    /// deterministic (tick, send-order) order.
    pub fn take_due(&mut self, tick: u64) -> Vec<Delivery<M>> {
        let mut due = Vec::new();
        let keys: Vec<(u64, u64)> = self
            .queue
            .range(..=(tick, u64::MAX))
            .map(|(k, _)| *k)
            .collect();
        for k in keys {
            due.push(self.queue.remove(&k).expect("key just listed"));
        }
        due
    }
}
