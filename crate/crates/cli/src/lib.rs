//! Experiment definitions, sweep runner, and result serialization behind the
//! `gwshape` binary. Split out as a library so tests can drive experiments
//! and parse their CSV output directly.

pub mod experiments;
pub mod report;
