use alloc::collections::VecDeque;

use crate::packet::Packet;

/// Default per-group queue capacity, in packets.
pub const DEFAULT_QUEUE_CAPACITY: usize = 100;

/// Counter snapshot for one group. `enqueued` counts offered packets, so
/// `enqueued == dequeued + dropped + queue_len` holds at every instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupCounters {
    pub enqueued: u64,
    pub dequeued: u64,
    pub dropped: u64,
    pub bytes_out: u64,
    pub queue_len: usize,
}

/// Bounded FIFO holding one group's backlog. Tail-drops at capacity.
#[derive(Debug, Clone)]
pub struct GroupQueue {
    slots: VecDeque<Packet>,
    capacity: usize,
    enqueued: u64,
    dequeued: u64,
    dropped: u64,
    bytes_out: u64,
}

impl GroupQueue {
    pub fn new(capacity: usize) -> Self {
        GroupQueue {
            slots: VecDeque::with_capacity(capacity.min(1024)),
            capacity,
            enqueued: 0,
            dequeued: 0,
            dropped: 0,
            bytes_out: 0,
        }
    }

    /// Offer a packet; returns false when the queue is full and the packet
    /// was dropped.
    pub fn push(&mut self, pkt: Packet) -> bool {
        self.enqueued += 1;
        if self.slots.len() >= self.capacity {
            self.dropped += 1;
            false
        } else {
            self.slots.push_back(pkt);
            true
        }
    }

    pub fn pop(&mut self) -> Option<Packet> {
        let pkt = self.slots.pop_front()?;
        self.dequeued += 1;
        self.bytes_out += u64::from(pkt.size);
        Some(pkt)
    }

    pub fn head_size(&self) -> Option<u32> {
        self.slots.front().map(|p| p.size)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.slots.iter()
    }

    pub fn counters(&self) -> GroupCounters {
        GroupCounters {
            enqueued: self.enqueued,
            dequeued: self.dequeued,
            dropped: self.dropped,
            bytes_out: self.bytes_out,
            queue_len: self.slots.len(),
        }
    }
}
