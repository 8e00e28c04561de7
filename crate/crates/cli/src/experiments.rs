//! Canned experiment definitions and the sweep runner.
//!
//! Four experiments over the two-station testbed, all deterministic from a
//! top-level seed:
//!
//! 1. address grouping — uploads from A and B, X% of the link to A's group,
//!    swept X ∈ {50..90}, shaped on the outgoing bound (part I) and repeated
//!    for downloads on the incoming bound (part II);
//! 2. application grouping — the same sweep with port rules (web :80 gets
//!    X%, ftp :21 the rest) instead of addresses;
//! 3. QoS hold under load — web pinned at 50% while ftp sessions grow
//!    k = 1..4, outgoing bound;
//! 4. wireless — experiment 1 part I at a 5 Mbps effective rate.
//!
//! The "web" source in experiments 2 and 3 is a continuously backlogged
//! stream on port 80: a stand-in for media traffic with sustained bandwidth
//! demand, so the share split is observable on the shaped bound. Each
//! experiment also runs its traffic with the engine disabled; that baseline
//! appears as the `disabled` variant and in `ExperimentResult::baseline`.

use core::net::Ipv4Addr;
use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use gwshape_core::packet::Direction;
use gwshape_core::policy::{
    validate_policy, GroupPolicy, GroupingMethod, IpPrefix, MatchRule, PolicyConfig,
    ValidatedPolicy,
};
use gwshape_core::sim::{run, Endpoint, MetricsReport, Placement, Scenario, SourceSpec};
use gwshape_core::policy::AddressField;

pub const DEFAULT_SEED: u64 = 42;
const DEFAULT_DURATION_US: u64 = 30_000_000;
const DEFAULT_RATE: u64 = 10_000_000;
const WIRELESS_RATE: u64 = 5_000_000;
const DEFAULT_CLASSIFY_COST_US: u64 = 5;
const DEFAULT_X_SWEEP: [u32; 5] = [50, 60, 70, 80, 90];
const DEFAULT_MAX_SESSIONS: u32 = 4;

const STATION_A: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 1);
const STATION_B: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 2);
const SERVER: Ipv4Addr = Ipv4Addr::new(192, 168, 1, 1);

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    /// SHA-256 of the canonical scenario text: identifies the run's inputs.
    pub digest: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: u8,
    /// All runs, the disabled baseline included, sorted by label.
    pub variants: Vec<Variant>,
    pub baseline: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationDelta {
    pub label: String,
    pub utilization: f64,
    pub delta_vs_baseline: f64,
}

/// Per-variant utilization against the disabled baseline.
pub fn compare_utilization(result: &ExperimentResult) -> Vec<UtilizationDelta> {
    result
        .variants
        .iter()
        .map(|v| UtilizationDelta {
            label: v.label.clone(),
            utilization: v.report.utilization,
            delta_vs_baseline: v.report.utilization - result.baseline.utilization,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExperimentError {
    UnknownId(u8),
    UnknownParameter(String),
    BadValue { key: String, value: String },
    Scenario(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::UnknownId(id) => {
                write!(f, "unknown experiment {id}; expected 1..=4")
            }
            ExperimentError::UnknownParameter(key) => write!(
                f,
                "unknown parameter {key:?}; valid keys: x, duration, classify_cost, \
                 lan_rate, wan_rate, rate, sessions"
            ),
            ExperimentError::BadValue { key, value } => {
                write!(f, "bad value {value:?} for parameter {key}")
            }
            ExperimentError::Scenario(msg) => write!(f, "scenario rejected: {msg}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

/// Knobs adjustable from the command line with `--set key=value`.
#[derive(Debug, Clone)]
pub struct Overrides {
    pub x_sweep: Vec<u32>,
    pub duration_us: u64,
    pub classify_cost_us: u64,
    pub lan_rate: Option<u64>,
    pub wan_rate: Option<u64>,
    pub max_sessions: u32,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            x_sweep: DEFAULT_X_SWEEP.to_vec(),
            duration_us: DEFAULT_DURATION_US,
            classify_cost_us: DEFAULT_CLASSIFY_COST_US,
            lan_rate: None,
            wan_rate: None,
            max_sessions: DEFAULT_MAX_SESSIONS,
        }
    }
}

impl Overrides {
    /// Parse `key=value` pairs; unknown keys are errors, later pairs win.
    pub fn parse(pairs: &[String]) -> Result<Overrides, ExperimentError> {
        let mut o = Overrides::default();
        for pair in pairs {
            let Some((key, value)) = pair.split_once('=') else {
                return Err(ExperimentError::BadValue {
                    key: pair.clone(),
                    value: String::from("(missing '=')"),
                });
            };
            let bad = || ExperimentError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            };
            match key {
                "x" => {
                    let xs: Result<Vec<u32>, _> =
                        value.split(',').map(|t| t.trim().parse()).collect();
                    o.x_sweep = xs.map_err(|_| bad())?;
                    if o.x_sweep.is_empty() || o.x_sweep.iter().any(|&x| !(1..100).contains(&x)) {
                        return Err(bad());
                    }
                }
                "duration" => {
                    let secs: f64 = value.parse().map_err(|_| bad())?;
                    if !(secs > 0.0 && secs.is_finite()) {
                        return Err(bad());
                    }
                    o.duration_us = (secs * 1e6).round() as u64;
                }
                "classify_cost" => o.classify_cost_us = value.parse().map_err(|_| bad())?,
                "lan_rate" => o.lan_rate = Some(value.parse().map_err(|_| bad())?),
                "wan_rate" => o.wan_rate = Some(value.parse().map_err(|_| bad())?),
                "rate" => {
                    let r: u64 = value.parse().map_err(|_| bad())?;
                    o.lan_rate = Some(r);
                    o.wan_rate = Some(r);
                }
                "sessions" => {
                    o.max_sessions = value.parse().map_err(|_| bad())?;
                    if o.max_sessions == 0 {
                        return Err(bad());
                    }
                }
                _ => return Err(ExperimentError::UnknownParameter(key.to_string())),
            }
        }
        Ok(o)
    }
}

pub fn scenario_digest(scenario: &Scenario) -> String {
    let hash = Sha256::digest(scenario.to_text().as_bytes());
    let mut out = String::with_capacity(64);
    for byte in hash {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Two groups holding `x`% / `100-x`%, keyed by station address.
fn address_policy(x: u32) -> ValidatedPolicy {
    let rule = |addr| MatchRule {
        address: Some((AddressField::Source, IpPrefix::host(addr))),
        port: None,
        proto: Default::default(),
    };
    let groups = vec![
        GroupPolicy {
            name: "stationA".into(),
            share_percent: x,
            rules: vec![rule(STATION_A)],
        },
        GroupPolicy {
            name: "stationB".into(),
            share_percent: 100 - x,
            rules: vec![rule(STATION_B)],
        },
    ];
    let grouping_method = GroupingMethod::derive(&groups);
    validate_policy(&PolicyConfig {
        groups,
        default_group: 0,
        grouping_method,
    })
    .expect("built-in policy is valid")
}

/// Web gets `x`%, ftp the rest, keyed by well-known port.
fn application_policy(x: u32) -> ValidatedPolicy {
    let rule = |port| MatchRule {
        address: None,
        port: Some(port),
        proto: Default::default(),
    };
    let groups = vec![
        GroupPolicy {
            name: "web".into(),
            share_percent: x,
            rules: vec![rule(80)],
        },
        GroupPolicy {
            name: "ftp".into(),
            share_percent: 100 - x,
            rules: vec![rule(21)],
        },
    ];
    let grouping_method = GroupingMethod::derive(&groups);
    validate_policy(&PolicyConfig {
        groups,
        default_group: 1,
        grouping_method,
    })
    .expect("built-in policy is valid")
}

fn base_scenario(o: &Overrides, seed: u64) -> Scenario {
    Scenario {
        stations: vec![
            Endpoint::new("a", STATION_A),
            Endpoint::new("b", STATION_B),
        ],
        server: Endpoint::new("srv", SERVER),
        sources: Vec::new(),
        lan_rate: o.lan_rate.unwrap_or(DEFAULT_RATE),
        wan_rate: o.wan_rate.unwrap_or(DEFAULT_RATE),
        placement: Placement::Disabled,
        measured: None,
        policy: None,
        classify_cost_us: o.classify_cost_us,
        duration_us: o.duration_us,
        seed,
    }
}

/// Uploads (part I) or downloads (part II) from both stations, ftp-like.
fn two_station_bulk(dir: Direction, web_port_on_a: bool) -> Vec<SourceSpec> {
    let mk = |station: &str, port: u16| match dir {
        Direction::Outgoing => SourceSpec::bulk(station, "srv").with_port(port),
        Direction::Incoming => SourceSpec::bulk("srv", station).with_port(port),
    };
    vec![
        mk("a", if web_port_on_a { 80 } else { 21 }),
        mk("b", 21),
    ]
}

struct Job {
    label: String,
    scenario: Scenario,
    is_baseline: bool,
}

fn experiment_jobs(
    id: u8,
    o: &Overrides,
    seed: u64,
) -> Result<Vec<Job>, ExperimentError> {
    let mut jobs = Vec::new();
    match id {
        // Address grouping, both bounds, plus wireless repeat (id 4).
        1 | 4 => {
            let rate_override = id == 4;
            let parts: &[Direction] = if id == 4 {
                &[Direction::Outgoing]
            } else {
                &[Direction::Outgoing, Direction::Incoming]
            };
            for &dir in parts {
                for &x in &o.x_sweep {
                    let mut s = base_scenario(o, seed);
                    if rate_override {
                        s.lan_rate = o.lan_rate.unwrap_or(WIRELESS_RATE);
                        s.wan_rate = o.wan_rate.unwrap_or(WIRELESS_RATE);
                    }
                    s.sources = two_station_bulk(dir, false);
                    s.placement = match dir {
                        Direction::Outgoing => Placement::OutgoingBound,
                        Direction::Incoming => Placement::IncomingBound,
                    };
                    s.policy = Some(address_policy(x));
                    jobs.push(Job {
                        label: format!("X={x} {}", dir.as_str()),
                        scenario: s,
                        is_baseline: false,
                    });
                }
            }
            let mut s = base_scenario(o, seed);
            if rate_override {
                s.lan_rate = o.lan_rate.unwrap_or(WIRELESS_RATE);
                s.wan_rate = o.wan_rate.unwrap_or(WIRELESS_RATE);
            }
            s.sources = two_station_bulk(Direction::Outgoing, false);
            s.measured = Some(Direction::Outgoing);
            jobs.push(Job {
                label: "disabled".into(),
                scenario: s,
                is_baseline: true,
            });
        }
        // Application grouping: same sweep, port rules, web stream on A.
        2 => {
            for dir in [Direction::Outgoing, Direction::Incoming] {
                for &x in &o.x_sweep {
                    let mut s = base_scenario(o, seed);
                    s.sources = two_station_bulk(dir, true);
                    s.placement = match dir {
                        Direction::Outgoing => Placement::OutgoingBound,
                        Direction::Incoming => Placement::IncomingBound,
                    };
                    s.policy = Some(application_policy(x));
                    jobs.push(Job {
                        label: format!("X={x} {}", dir.as_str()),
                        scenario: s,
                        is_baseline: false,
                    });
                }
            }
            let mut s = base_scenario(o, seed);
            s.sources = two_station_bulk(Direction::Outgoing, true);
            s.measured = Some(Direction::Outgoing);
            jobs.push(Job {
                label: "disabled".into(),
                scenario: s,
                is_baseline: true,
            });
        }
        // Web pinned at 50%, ftp sessions added one at a time, alternating
        // stations (A, B, A, B). Baseline carries the full ftp load with the
        // engine off, showing what the web stream loses without shaping.
        3 => {
            let ftp_session = |i: u32| {
                SourceSpec::bulk(if i % 2 == 0 { "a" } else { "b" }, "srv").with_port(21)
            };
            for k in 1..=o.max_sessions {
                let mut s = base_scenario(o, seed);
                s.sources.push(SourceSpec::bulk("a", "srv").with_port(80));
                for i in 0..k {
                    s.sources.push(ftp_session(i));
                }
                s.placement = Placement::OutgoingBound;
                s.policy = Some(application_policy(50));
                jobs.push(Job {
                    label: format!("k={k}"),
                    scenario: s,
                    is_baseline: false,
                });
            }
            let mut s = base_scenario(o, seed);
            s.sources.push(SourceSpec::bulk("a", "srv").with_port(80));
            for i in 0..o.max_sessions {
                s.sources.push(ftp_session(i));
            }
            s.measured = Some(Direction::Outgoing);
            jobs.push(Job {
                label: "disabled".into(),
                scenario: s,
                is_baseline: true,
            });
        }
        other => return Err(ExperimentError::UnknownId(other)),
    }
    Ok(jobs)
}

/// Run one experiment's full variant sweep. Pure in (id, overrides, seed):
/// identical inputs give identical results, whatever the execution order.
pub fn run_experiment(
    id: u8,
    overrides: &Overrides,
    seed: u64,
) -> Result<ExperimentResult, ExperimentError> {
    let jobs = experiment_jobs(id, overrides, seed)?;
    let mut baseline = None;
    let mut by_label = BTreeMap::new();
    for job in jobs {
        let report = run(&job.scenario)
            .map_err(|e| ExperimentError::Scenario(e.to_string()))?;
        if job.is_baseline {
            baseline = Some(report.clone());
        }
        by_label.insert(
            job.label.clone(),
            Variant {
                label: job.label,
                digest: scenario_digest(&job.scenario),
                report,
            },
        );
    }
    Ok(ExperimentResult {
        experiment: id,
        variants: by_label.into_values().collect(),
        baseline: baseline.expect("every experiment defines a baseline"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Overrides {
        Overrides {
            duration_us: 2_000_000,
            ..Overrides::default()
        }
    }

    #[test]
    fn experiment_one_yields_eleven_variants() {
        let r = run_experiment(1, &quick(), DEFAULT_SEED).unwrap();
        assert_eq!(r.variants.len(), 11);
        let disabled = r.variants.iter().find(|v| v.label == "disabled").unwrap();
        assert_eq!(disabled.report, r.baseline);
        // Sorted by label, digests all distinct.
        let labels: Vec<&str> = r.variants.iter().map(|v| v.label.as_str()).collect();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(labels, sorted);
        let mut digests: Vec<&str> = r.variants.iter().map(|v| v.digest.as_str()).collect();
        digests.sort_unstable();
        digests.dedup();
        assert_eq!(digests.len(), 11);
    }

    #[test]
    fn experiment_three_yields_five_variants() {
        let r = run_experiment(3, &quick(), DEFAULT_SEED).unwrap();
        let labels: Vec<&str> = r.variants.iter().map(|v| v.label.as_str()).collect();
        assert_eq!(labels, vec!["disabled", "k=1", "k=2", "k=3", "k=4"]);
    }

    #[test]
    fn restricted_sweep_shrinks_the_variant_list() {
        let mut o = quick();
        o.x_sweep = vec![50];
        let r = run_experiment(1, &o, DEFAULT_SEED).unwrap();
        assert_eq!(r.variants.len(), 3); // 1 X x 2 bounds + disabled
        let r = run_experiment(4, &o, DEFAULT_SEED).unwrap();
        assert_eq!(r.variants.len(), 2); // outgoing only + disabled
    }

    #[test]
    fn experiments_are_reproducible() {
        let mut o = quick();
        o.x_sweep = vec![70];
        let a = run_experiment(2, &o, 7).unwrap();
        let b = run_experiment(2, &o, 7).unwrap();
        assert_eq!(a, b);
        let c = run_experiment(2, &o, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn wireless_runs_at_half_rate() {
        let mut o = quick();
        o.x_sweep = vec![50];
        let r = run_experiment(4, &o, DEFAULT_SEED).unwrap();
        for v in &r.variants {
            assert_eq!(v.report.link_rate, WIRELESS_RATE);
        }
    }

    #[test]
    fn unknown_id_and_unknown_key_are_rejected() {
        assert!(matches!(
            run_experiment(9, &Overrides::default(), 1),
            Err(ExperimentError::UnknownId(9))
        ));
        assert!(matches!(
            Overrides::parse(&["windowsize=8".into()]),
            Err(ExperimentError::UnknownParameter(_))
        ));
        assert!(matches!(
            Overrides::parse(&["x=0".into()]),
            Err(ExperimentError::BadValue { .. })
        ));
        assert!(Overrides::parse(&["x=50,60".into(), "rate=5000000".into()]).is_ok());
    }

    #[test]
    fn deltas_compare_against_the_baseline() {
        let mut o = quick();
        o.x_sweep = vec![50];
        o.classify_cost_us = 0;
        let r = run_experiment(1, &o, DEFAULT_SEED).unwrap();
        let deltas = compare_utilization(&r);
        assert_eq!(deltas.len(), 3);
        let disabled = deltas.iter().find(|d| d.label == "disabled").unwrap();
        assert_eq!(disabled.delta_vs_baseline, 0.0);
        // Zero-cost shaping on a saturated link: no visible delta.
        let outgoing = deltas.iter().find(|d| d.label == "X=50 outgoing").unwrap();
        assert!(
            outgoing.delta_vs_baseline.abs() < 0.01,
            "delta {}",
            outgoing.delta_vs_baseline
        );
    }
}
