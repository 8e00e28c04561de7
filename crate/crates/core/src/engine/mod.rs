//! The shaping data path: classifier -> per-group FIFO queues -> deficit
//! round robin scheduler -> short transmission queue feeding the wire.

mod classify;
mod drr;
mod queue;

pub use classify::classify;
pub use drr::{quantum_unit, SchedulerState, QUANTUM_UNIT};
pub use queue::{GroupCounters, GroupQueue, DEFAULT_QUEUE_CAPACITY};

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::packet::{Direction, Micros, Packet};
use crate::policy::ValidatedPolicy;

/// Depth of the transmission staging queue between scheduler and wire.
pub const DEFAULT_TX_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    /// Per-group queue capacity in packets.
    pub queue_capacity: usize,
    /// Transmission queue depth in packets.
    pub tx_depth: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            tx_depth: DEFAULT_TX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted { group: usize },
    Dropped { group: usize },
}

impl EnqueueOutcome {
    pub fn group(self) -> usize {
        match self {
            EnqueueOutcome::Accepted { group } | EnqueueOutcome::Dropped { group } => group,
        }
    }

    pub fn accepted(self) -> bool {
        matches!(self, EnqueueOutcome::Accepted { .. })
    }
}

/// One gateway bound's shaping pipeline, built from a validated policy.
#[derive(Debug, Clone)]
pub struct ShapingEngine {
    policy: ValidatedPolicy,
    direction: Direction,
    queues: Vec<GroupQueue>,
    sched: SchedulerState,
    tx: VecDeque<Packet>,
    tx_depth: usize,
}

impl ShapingEngine {
    pub fn new(policy: ValidatedPolicy, direction: Direction, config: EngineConfig) -> Self {
        let shares: Vec<u32> = policy.shares().collect();
        let queues = (0..policy.group_count())
            .map(|_| GroupQueue::new(config.queue_capacity))
            .collect();
        ShapingEngine {
            sched: SchedulerState::new(&shares),
            queues,
            policy,
            direction,
            tx: VecDeque::with_capacity(config.tx_depth),
            tx_depth: config.tx_depth.max(1),
        }
    }

    pub fn policy(&self) -> &ValidatedPolicy {
        &self.policy
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn classify(&self, pkt: &Packet) -> usize {
        classify(&self.policy, pkt, self.direction)
    }

    /// Classify and queue a packet, stamping its enqueue time. Full group
    /// queues tail-drop.
    pub fn enqueue(&mut self, mut pkt: Packet, now: Micros) -> EnqueueOutcome {
        debug_assert!(now >= pkt.created_at);
        let group = self.classify(&pkt);
        pkt.enqueued_at = Some(now);
        if self.queues[group].push(pkt) {
            EnqueueOutcome::Accepted { group }
        } else {
            EnqueueOutcome::Dropped { group }
        }
    }

    /// Next packet by scheduler order, straight off the group queues.
    /// `None` exactly when every group queue is empty.
    pub fn select_next(&mut self) -> Option<Packet> {
        self.sched.select(&mut self.queues)
    }

    /// Hand the wire its next packet. The transmission queue is topped up
    /// from the scheduler before and after the head leaves, so packets
    /// depart in exactly the order the scheduler produced them.
    pub fn pop_for_wire(&mut self) -> Option<Packet> {
        self.refill_tx();
        let head = self.tx.pop_front();
        self.refill_tx();
        head
    }

    fn refill_tx(&mut self) {
        while self.tx.len() < self.tx_depth {
            match self.select_next() {
                Some(p) => self.tx.push_back(p),
                None => break,
            }
        }
    }

    pub fn snapshot_counters(&self) -> Vec<GroupCounters> {
        self.queues.iter().map(|q| q.counters()).collect()
    }

    /// Packets currently held anywhere in the pipeline: group queues in
    /// group order, then the transmission queue.
    pub fn queued_packets(&self) -> impl Iterator<Item = &Packet> {
        self.queues.iter().flat_map(|q| q.iter()).chain(self.tx.iter())
    }

    pub fn tx_len(&self) -> usize {
        self.tx.len()
    }
}
