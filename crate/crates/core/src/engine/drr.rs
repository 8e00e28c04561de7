//! Deficit round robin over the group queues, realizing percentage shares.
//!
//! Each group's quantum is `share_percent * quantum_unit` bytes. The unit is
//! 150 bytes — a 10% share gets exactly one MTU per round — stretched when a
//! share below 10% would otherwise leave a group unable to send a full-size
//! packet in one round.

use alloc::vec;
use alloc::vec::Vec;

use super::queue::GroupQueue;
use crate::packet::{Packet, MAX_PACKET};

pub const QUANTUM_UNIT: u64 = 150;

/// Bytes of credit per percent-point such that every group's quantum is at
/// least one MTU.
pub fn quantum_unit(min_share: u32) -> u64 {
    let min_share = u64::from(min_share.max(1));
    QUANTUM_UNIT.max(u64::from(MAX_PACKET).div_ceil(min_share))
}

#[derive(Debug, Clone)]
pub struct SchedulerState {
    deficits: Vec<u64>,
    quanta: Vec<u64>,
    cursor: usize,
}

impl SchedulerState {
    pub fn new(shares: &[u32]) -> Self {
        assert!(!shares.is_empty());
        let unit = quantum_unit(shares.iter().copied().min().unwrap());
        let quanta: Vec<u64> = shares.iter().map(|&s| u64::from(s) * unit).collect();
        let mut deficits = vec![0; quanta.len()];
        // The scheduler starts its first round by entering group 0's turn.
        deficits[0] = quanta[0];
        SchedulerState {
            deficits,
            quanta,
            cursor: 0,
        }
    }

    pub fn quanta(&self) -> &[u64] {
        &self.quanta
    }

    pub fn deficits(&self) -> &[u64] {
        &self.deficits
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Move to the next group's turn, granting it its quantum.
    fn advance(&mut self) {
        self.cursor = (self.cursor + 1) % self.quanta.len();
        self.deficits[self.cursor] += self.quanta[self.cursor];
    }

    /// Pick the next packet to transmit. The current group keeps sending
    /// while its deficit covers its head packet; an emptied or exhausted
    /// group passes the turn on. Empty groups forfeit their credit, so idle
    /// bandwidth redistributes instead of being hoarded.
    pub fn select(&mut self, queues: &mut [GroupQueue]) -> Option<Packet> {
        debug_assert_eq!(queues.len(), self.quanta.len());
        if queues.iter().all(|q| q.is_empty()) {
            return None;
        }
        loop {
            let g = self.cursor;
            match queues[g].head_size() {
                None => {
                    self.deficits[g] = 0;
                    self.advance();
                }
                Some(size) if self.deficits[g] >= u64::from(size) => {
                    self.deficits[g] -= u64::from(size);
                    return queues[g].pop();
                }
                Some(_) => self.advance(),
            }
        }
    }
}
