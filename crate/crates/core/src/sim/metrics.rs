//! Trace records and the aggregated per-run report.
//!
//! All accumulation is integer arithmetic; floats only appear at
//! finalization, so identical runs produce bit-identical reports.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::packet::{Direction, Micros};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Enqueue,
    Drop,
    WireDepart,
    WireArrive,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Enqueue => "enqueue",
            EventKind::Drop => "drop",
            EventKind::WireDepart => "wire-depart",
            EventKind::WireArrive => "wire-arrive",
        }
    }
}

/// One observable simulation event. `group` is set only on the bound where
/// the shaping engine runs; `bound` tells which side of the gateway fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub time_us: Micros,
    pub kind: EventKind,
    pub flow: u32,
    pub group: Option<u32>,
    pub size: u32,
    pub bound: Direction,
}

/// Render a trace as CSV (`time_us,kind,flow_id,group,size`); `group` is
/// empty for events on an unshaped bound.
pub fn trace_to_csv(records: &[EventRecord]) -> String {
    use core::fmt::Write;
    let mut out = String::from("time_us,kind,flow_id,group,size\n");
    for r in records {
        let _ = write!(out, "{},{},{},", r.time_us, r.kind.as_str(), r.flow);
        if let Some(g) = r.group {
            let _ = write!(out, "{g}");
        }
        let _ = writeln!(out, ",{}", r.size);
    }
    out
}

/// Byte/packet/delay totals for one traffic aggregate (a policy group or a
/// single flow), measured on one bound. Delay is enqueue-to-wire-depart of
/// the packets that actually departed; `packets`/`bytes` count departures.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageStats {
    pub name: String,
    pub bytes: u64,
    pub packets: u64,
    pub drops: u64,
    pub mean_delay_us: f64,
    pub delay_stddev_us: f64,
    pub max_delay_us: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub count: u64,
    pub mean_us: f64,
    pub stddev_us: f64,
    pub max_us: Micros,
}

/// Aggregated outcome of one run, measured on a single bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub measured: Direction,
    /// Rate of the measured bound's wire, bits per second.
    pub link_rate: u64,
    pub duration_us: Micros,
    pub groups: Vec<UsageStats>,
    pub flows: Vec<UsageStats>,
    pub total_bytes: u64,
    pub total_packets: u64,
    pub total_drops: u64,
    /// Fraction of the measured wire's capacity carried, clamped to [0, 1].
    pub utilization: f64,
    /// Bytes departed per whole second of the run.
    pub timeline: Vec<u64>,
}

impl MetricsReport {
    /// Queueing-delay summary for one group; zeroes when nothing departed.
    pub fn delay_stats(&self, group: usize) -> DelayStats {
        let g = &self.groups[group];
        DelayStats {
            count: g.packets,
            mean_us: g.mean_delay_us,
            stddev_us: g.delay_stddev_us,
            max_us: g.max_delay_us,
        }
    }

    pub fn group(&self, name: &str) -> Option<&UsageStats> {
        self.groups.iter().find(|g| g.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroDurationError;

impl fmt::Display for ZeroDurationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("cannot compute utilization over a zero-length interval")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ZeroDurationError {}

/// Link utilization of `bytes` carried over `duration_us` on a
/// `link_rate`-bps wire, clamped to [0, 1].
pub fn utilization(
    bytes: u64,
    link_rate: u64,
    duration_us: Micros,
) -> Result<f64, ZeroDurationError> {
    if duration_us == 0 || link_rate == 0 {
        return Err(ZeroDurationError);
    }
    let carried = (bytes as f64) * 8.0 * 1e6;
    let capacity = (link_rate as f64) * (duration_us as f64);
    Ok((carried / capacity).clamp(0.0, 1.0))
}

/// Integer accumulator behind one [`UsageStats`] row.
#[derive(Debug, Clone, Default)]
pub(crate) struct Accum {
    bytes: u64,
    packets: u64,
    drops: u64,
    delay_sum: u64,
    delay_sq_sum: u128,
    delay_max: Micros,
}

impl Accum {
    pub(crate) fn on_drop(&mut self) {
        self.drops += 1;
    }

    pub(crate) fn on_depart(&mut self, size: u32, delay_us: Micros) {
        self.bytes += size as u64;
        self.packets += 1;
        self.delay_sum += delay_us;
        self.delay_sq_sum += (delay_us as u128) * (delay_us as u128);
        self.delay_max = self.delay_max.max(delay_us);
    }

    pub(crate) fn finalize(&self, name: String) -> UsageStats {
        let (mean, stddev) = if self.packets == 0 {
            (0.0, 0.0)
        } else {
            let n = self.packets as f64;
            let mean = self.delay_sum as f64 / n;
            // Population variance via E[x^2] - E[x]^2; clamp the tiny
            // negative residue floating point can leave behind.
            let var = (self.delay_sq_sum as f64 / n - mean * mean).max(0.0);
            (mean, libm::sqrt(var))
        };
        UsageStats {
            name,
            bytes: self.bytes,
            packets: self.packets,
            drops: self.drops,
            mean_delay_us: mean,
            delay_stddev_us: stddev,
            max_delay_us: self.delay_max,
        }
    }
}

/// Live aggregation of measured-bound events into a [`MetricsReport`].
#[derive(Debug, Clone)]
pub(crate) struct ReportBuilder {
    measured: Direction,
    link_rate: u64,
    duration_us: Micros,
    groups: Vec<Accum>,
    group_names: Vec<String>,
    flows: Vec<Accum>,
    flow_names: Vec<String>,
    timeline: Vec<u64>,
}

impl ReportBuilder {
    pub(crate) fn new(
        measured: Direction,
        link_rate: u64,
        duration_us: Micros,
        group_names: Vec<String>,
        flow_names: Vec<String>,
    ) -> Self {
        let seconds = duration_us.div_ceil(1_000_000) as usize;
        ReportBuilder {
            measured,
            link_rate,
            duration_us,
            groups: vec![Accum::default(); group_names.len()],
            group_names,
            flows: vec![Accum::default(); flow_names.len()],
            flow_names,
            timeline: vec![0; seconds],
        }
    }

    /// Fold in one event; ignores bounds other than the measured one.
    /// `delay_us` accompanies departures (enqueue-to-depart).
    pub(crate) fn absorb(&mut self, rec: &EventRecord, delay_us: Micros) {
        if rec.bound != self.measured {
            return;
        }
        let group = rec.group.map(|g| g as usize).unwrap_or(0);
        match rec.kind {
            EventKind::Drop => {
                self.groups[group].on_drop();
                self.flows[rec.flow as usize].on_drop();
            }
            EventKind::WireDepart => {
                self.groups[group].on_depart(rec.size, delay_us);
                self.flows[rec.flow as usize].on_depart(rec.size, delay_us);
                let sec = (rec.time_us / 1_000_000) as usize;
                if let Some(slot) = self.timeline.get_mut(sec) {
                    *slot += rec.size as u64;
                }
            }
            EventKind::Enqueue | EventKind::WireArrive => {}
        }
    }

    pub(crate) fn finalize(&self) -> MetricsReport {
        let groups: Vec<UsageStats> = self
            .groups
            .iter()
            .zip(&self.group_names)
            .map(|(a, n)| a.finalize(n.clone()))
            .collect();
        let flows: Vec<UsageStats> = self
            .flows
            .iter()
            .zip(&self.flow_names)
            .map(|(a, n)| a.finalize(n.clone()))
            .collect();
        let total_bytes: u64 = groups.iter().map(|g| g.bytes).sum();
        let total_packets: u64 = groups.iter().map(|g| g.packets).sum();
        let total_drops: u64 = groups.iter().map(|g| g.drops).sum();
        let utilization = utilization(total_bytes, self.link_rate, self.duration_us)
            .unwrap_or(0.0);
        MetricsReport {
            measured: self.measured,
            link_rate: self.link_rate,
            duration_us: self.duration_us,
            groups,
            flows,
            total_bytes,
            total_packets,
            total_drops,
            utilization,
            timeline: self.timeline.clone(),
        }
    }
}
