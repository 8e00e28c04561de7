//! Percentage-based bandwidth sharing for a LAN gateway, plus a
//! deterministic event-driven simulator to study it.
//!
//! The data path is a four-stage pipeline on one gateway bound: a classifier
//! steers each packet into a named group's FIFO queue, a deficit round robin
//! scheduler realizes the groups' percentage shares, and a short transmission
//! queue feeds the wire. Policies are declarative text (see [`policy`]),
//! validated before use. The [`sim`] module runs closed-loop traffic through
//! a gateway model and reports per-group/per-flow throughput, drops, delay
//! statistics, and link utilization; identical scenarios (seed included)
//! reproduce byte-identical traces and reports.
//!
//! The crate is `no_std` (alloc required); IO, file handling, and the
//! experiment CLI live in the companion `gwshape-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod packet;
pub mod policy;
pub mod sim;

pub use engine::{classify, EngineConfig, EnqueueOutcome, GroupCounters, ShapingEngine};
pub use packet::{Direction, Micros, Packet, Protocol, MAX_PACKET, MIN_PACKET};
pub use policy::{parse_policy, validate_policy, PolicyConfig, PolicyError, ValidatedPolicy};
pub use sim::{
    run, run_with_trace, EventKind, EventRecord, MetricsReport, Placement, Scenario, Simulation,
    SourceSpec,
};
