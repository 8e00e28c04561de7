//! Testbed description: endpoints, link rates, engine placement, traffic
//! sources, and the policy under test.
//!
//! Scenarios load from a line-oriented text format mirroring the policy
//! grammar (`#` comments, one directive per line); policy `group`/`default`
//! lines embed directly in the scenario file:
//!
//! ```text
//! station A 10.0.0.1
//! station B 10.0.0.2
//! server srv 192.168.1.1
//! link lan 10000000
//! link wan 10000000
//! placement outgoing
//! classify_cost 5
//! seed 42
//! duration 30
//! source bulk A srv size 1500 window 8 port 21
//! source bulk B srv size 1500 window 8 port 21
//! group stationA 70 src 10.0.0.1
//! group stationB 30 src 10.0.0.2
//! default stationA
//! ```

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use crate::packet::{Direction, Micros, MAX_PACKET, MIN_PACKET};
use crate::policy::{parse_policy, validate_policy, ValidatedPolicy};

/// Where the shaping engine sits, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    OutgoingBound,
    IncomingBound,
    Disabled,
}

impl Placement {
    pub fn as_str(self) -> &'static str {
        match self {
            Placement::OutgoingBound => "outgoing",
            Placement::IncomingBound => "incoming",
            Placement::Disabled => "disabled",
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Placement::OutgoingBound => Some(Direction::Outgoing),
            Placement::IncomingBound => Some(Direction::Incoming),
            Placement::Disabled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub name: String,
    pub addr: Ipv4Addr,
}

impl Endpoint {
    pub fn new(name: &str, addr: Ipv4Addr) -> Self {
        Endpoint {
            name: name.to_owned(),
            addr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Greedy windowed transfer: `window` packets stay in flight, a new one
    /// is released whenever a prior packet departs the bottleneck (or is
    /// dropped there). Always backlogged.
    Bulk { packet_size: u32, window: u32 },
    /// Closed-loop exchange: the station sends one request, the server
    /// answers with `response_size` bytes (segmented at the MTU) after
    /// `response_delay_us`, and only a completed response triggers the next
    /// request. There is no retransmission: a dropped request or response
    /// ends that flow's exchange.
    RequestResponse {
        request_size: u32,
        response_size: u32,
        response_delay_us: Micros,
    },
}

/// One traffic flow. Data moves `station -> peer`; for request/response the
/// station is the client and the peer must be the server. `port` is the
/// connection's well-known (server-side) port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub station: String,
    pub peer: String,
    pub port: u16,
    pub start_at_us: Micros,
    /// `None` runs until the scenario ends.
    pub stop_at_us: Option<Micros>,
}

impl SourceSpec {
    pub fn bulk(station: &str, peer: &str) -> Self {
        SourceSpec {
            kind: SourceKind::Bulk {
                packet_size: 1500,
                window: 8,
            },
            station: station.to_owned(),
            peer: peer.to_owned(),
            port: 21,
            start_at_us: 0,
            stop_at_us: None,
        }
    }

    pub fn request_response(station: &str, peer: &str) -> Self {
        SourceSpec {
            kind: SourceKind::RequestResponse {
                request_size: 200,
                response_size: 15_000,
                response_delay_us: 1_000,
            },
            station: station.to_owned(),
            peer: peer.to_owned(),
            port: 80,
            start_at_us: 0,
            stop_at_us: None,
        }
    }

    pub fn with_port(mut self, port: u16) -> Self {
        self.port = port;
        self
    }
}

/// Full simulation input. Identical scenarios (seed included) produce
/// byte-identical traces and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stations: Vec<Endpoint>,
    pub server: Endpoint,
    pub sources: Vec<SourceSpec>,
    /// Gateway -> LAN link, bits per second (the incoming bound's wire).
    pub lan_rate: u64,
    /// Gateway -> Internet link, bits per second (the outgoing bound's wire).
    pub wan_rate: u64,
    pub placement: Placement,
    /// Which bound the report measures. Defaults to the shaped bound, or
    /// outgoing when the engine is disabled.
    pub measured: Option<Direction>,
    pub policy: Option<ValidatedPolicy>,
    /// Per-packet processing charge on the shaped bound, microseconds.
    pub classify_cost_us: Micros,
    pub duration_us: Micros,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            stations: Vec::new(),
            server: Endpoint::new("server", Ipv4Addr::new(192, 168, 1, 1)),
            sources: Vec::new(),
            lan_rate: 10_000_000,
            wan_rate: 10_000_000,
            placement: Placement::Disabled,
            measured: None,
            policy: None,
            classify_cost_us: 5,
            duration_us: 10_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    ZeroRate(&'static str),
    ZeroDuration,
    DuplicateEndpointName(String),
    DuplicateEndpointAddr(Ipv4Addr),
    UnknownEndpoint(String),
    FlowMustCrossGateway { station: String, peer: String },
    ClientMustBeStation(String),
    MissingPolicy,
    BadPacketSize(u32),
    BadWindow(u32),
    BadResponseSize(u32),
    StopBeforeStart,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::ZeroRate(which) => write!(f, "{which} rate must be positive"),
            ScenarioError::ZeroDuration => write!(f, "duration must be positive"),
            ScenarioError::DuplicateEndpointName(n) => write!(f, "duplicate endpoint name {n}"),
            ScenarioError::DuplicateEndpointAddr(a) => write!(f, "duplicate endpoint address {a}"),
            ScenarioError::UnknownEndpoint(n) => write!(f, "source references unknown endpoint {n}"),
            ScenarioError::FlowMustCrossGateway { station, peer } => {
                write!(f, "flow {station}->{peer} must have exactly one end at the server")
            }
            ScenarioError::ClientMustBeStation(n) => {
                write!(f, "request-response client {n} must be a LAN station")
            }
            ScenarioError::MissingPolicy => write!(f, "placement requires a policy"),
            ScenarioError::BadPacketSize(s) => {
                write!(f, "packet size {s} outside {MIN_PACKET}..={MAX_PACKET}")
            }
            ScenarioError::BadWindow(w) => write!(f, "window {w} must be at least 1"),
            ScenarioError::BadResponseSize(s) => {
                write!(f, "response size {s} must be at least {MIN_PACKET}")
            }
            ScenarioError::StopBeforeStart => write!(f, "stop time precedes start time"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScenarioError {}

impl Scenario {
    pub fn measured_direction(&self) -> Direction {
        self.measured
            .or_else(|| self.placement.direction())
            .unwrap_or(Direction::Outgoing)
    }

    pub fn endpoint(&self, name: &str) -> Option<&Endpoint> {
        if self.server.name == name {
            Some(&self.server)
        } else {
            self.stations.iter().find(|s| s.name == name)
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.lan_rate == 0 {
            return Err(ScenarioError::ZeroRate("lan"));
        }
        if self.wan_rate == 0 {
            return Err(ScenarioError::ZeroRate("wan"));
        }
        if self.duration_us == 0 {
            return Err(ScenarioError::ZeroDuration);
        }
        for (i, ep) in self.stations.iter().enumerate() {
            if ep.name == self.server.name
                || self.stations[..i].iter().any(|o| o.name == ep.name)
            {
                return Err(ScenarioError::DuplicateEndpointName(ep.name.clone()));
            }
            if ep.addr == self.server.addr
                || self.stations[..i].iter().any(|o| o.addr == ep.addr)
            {
                return Err(ScenarioError::DuplicateEndpointAddr(ep.addr));
            }
        }
        if self.placement != Placement::Disabled && self.policy.is_none() {
            return Err(ScenarioError::MissingPolicy);
        }
        for src in &self.sources {
            for name in [&src.station, &src.peer] {
                if self.endpoint(name).is_none() {
                    return Err(ScenarioError::UnknownEndpoint(name.clone()));
                }
            }
            let station_is_server = src.station == self.server.name;
            let peer_is_server = src.peer == self.server.name;
            if station_is_server == peer_is_server {
                return Err(ScenarioError::FlowMustCrossGateway {
                    station: src.station.clone(),
                    peer: src.peer.clone(),
                });
            }
            match src.kind {
                SourceKind::Bulk {
                    packet_size,
                    window,
                } => {
                    if !(MIN_PACKET..=MAX_PACKET).contains(&packet_size) {
                        return Err(ScenarioError::BadPacketSize(packet_size));
                    }
                    if window == 0 {
                        return Err(ScenarioError::BadWindow(window));
                    }
                }
                SourceKind::RequestResponse {
                    request_size,
                    response_size,
                    ..
                } => {
                    if !(MIN_PACKET..=MAX_PACKET).contains(&request_size) {
                        return Err(ScenarioError::BadPacketSize(request_size));
                    }
                    if response_size < MIN_PACKET {
                        return Err(ScenarioError::BadResponseSize(response_size));
                    }
                    if station_is_server {
                        return Err(ScenarioError::ClientMustBeStation(src.station.clone()));
                    }
                }
            }
            if let Some(stop) = src.stop_at_us {
                if stop <= src.start_at_us {
                    return Err(ScenarioError::StopBeforeStart);
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; [`Scenario::parse`] reads it back. Used as the
    /// digest material identifying a run's inputs.
    pub fn to_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        for st in &self.stations {
            let _ = writeln!(out, "station {} {}", st.name, st.addr);
        }
        let _ = writeln!(out, "server {} {}", self.server.name, self.server.addr);
        let _ = writeln!(out, "link lan {}", self.lan_rate);
        let _ = writeln!(out, "link wan {}", self.wan_rate);
        let _ = writeln!(out, "placement {}", self.placement.as_str());
        if let Some(m) = self.measured {
            let _ = writeln!(out, "measured {}", m.as_str());
        }
        let _ = writeln!(out, "classify_cost {}", self.classify_cost_us);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "duration {}", self.duration_us as f64 / 1e6);
        for s in &self.sources {
            match s.kind {
                SourceKind::Bulk {
                    packet_size,
                    window,
                } => {
                    let _ = write!(
                        out,
                        "source bulk {} {} size {} window {} port {}",
                        s.station, s.peer, packet_size, window, s.port
                    );
                }
                SourceKind::RequestResponse {
                    request_size,
                    response_size,
                    response_delay_us,
                } => {
                    let _ = write!(
                        out,
                        "source reqresp {} {} request {} response {} delay {} port {}",
                        s.station, s.peer, request_size, response_size, response_delay_us, s.port
                    );
                }
            }
            let _ = write!(out, " start {}", s.start_at_us as f64 / 1e6);
            if let Some(stop) = s.stop_at_us {
                let _ = write!(out, " stop {}", stop as f64 / 1e6);
            }
            out.push('\n');
        }
        if let Some(policy) = &self.policy {
            out.push_str(&policy.to_text());
        }
        out
    }

    /// Parse the scenario text format. Embedded policy lines are collected,
    /// parsed, and validated as a unit.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioParseError> {
        parse_scenario(text)
    }
}

/// Scenario text failure, pointing at the 1-based offending line
/// (0 for file-level problems).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ScenarioParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.msg)
        } else {
            write!(f, "{}", self.msg)
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScenarioParseError {}

fn perr(line: usize, msg: impl fmt::Display) -> ScenarioParseError {
    ScenarioParseError {
        line,
        msg: format!("{msg}"),
    }
}

fn seconds_to_us(token: &str, line: usize, what: &str) -> Result<Micros, ScenarioParseError> {
    let secs: f64 = token
        .parse()
        .map_err(|_| perr(line, format_args!("bad {what} {token:?} (seconds)")))?;
    if !secs.is_finite() || secs < 0.0 {
        return Err(perr(line, format_args!("bad {what} {token:?} (seconds)")));
    }
    Ok(libm::round(secs * 1e6) as Micros)
}

fn parse_num<T: core::str::FromStr>(
    token: &str,
    line: usize,
    what: &str,
) -> Result<T, ScenarioParseError> {
    token
        .parse()
        .map_err(|_| perr(line, format_args!("bad {what} {token:?}")))
}

fn parse_source(tokens: &[&str], line: usize) -> Result<SourceSpec, ScenarioParseError> {
    let [kind, station, peer, rest @ ..] = tokens else {
        return Err(perr(line, "source needs a kind, a station, and a peer"));
    };
    let mut spec = match *kind {
        "bulk" => SourceSpec::bulk(station, peer),
        "reqresp" => SourceSpec::request_response(station, peer),
        other => return Err(perr(line, format_args!("unknown source kind {other:?}"))),
    };
    let mut rest = rest;
    while let Some((&key, tail)) = rest.split_first() {
        let Some(&value) = tail.first() else {
            return Err(perr(line, format_args!("{key} needs a value")));
        };
        match (&mut spec.kind, key) {
            (SourceKind::Bulk { packet_size, .. }, "size") => {
                *packet_size = parse_num(value, line, "size")?;
            }
            (SourceKind::Bulk { window, .. }, "window") => {
                *window = parse_num(value, line, "window")?;
            }
            (SourceKind::RequestResponse { request_size, .. }, "request") => {
                *request_size = parse_num(value, line, "request size")?;
            }
            (SourceKind::RequestResponse { response_size, .. }, "response") => {
                *response_size = parse_num(value, line, "response size")?;
            }
            (SourceKind::RequestResponse {
                response_delay_us, ..
            }, "delay") => {
                *response_delay_us = parse_num(value, line, "delay")?;
            }
            (_, "port") => spec.port = parse_num(value, line, "port")?,
            (_, "start") => spec.start_at_us = seconds_to_us(value, line, "start")?,
            (_, "stop") => spec.stop_at_us = Some(seconds_to_us(value, line, "stop")?),
            (_, other) => {
                return Err(perr(line, format_args!("unknown source option {other:?}")));
            }
        }
        rest = &tail[1..];
    }
    Ok(spec)
}

fn parse_scenario(text: &str) -> Result<Scenario, ScenarioParseError> {
    let mut scenario = Scenario::default();
    let mut saw_server = false;
    let mut policy_lines: Vec<(usize, &str)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&directive, tail)) = tokens.split_first() else {
            continue;
        };
        match directive {
            "station" | "server" => {
                let [name, addr] = tail else {
                    return Err(perr(line, format_args!("{directive} needs a name and an address")));
                };
                let addr: Ipv4Addr = parse_num(addr, line, "address")?;
                let ep = Endpoint::new(name, addr);
                if directive == "server" {
                    if saw_server {
                        return Err(perr(line, "server already declared"));
                    }
                    saw_server = true;
                    scenario.server = ep;
                } else {
                    scenario.stations.push(ep);
                }
            }
            "link" => {
                let [which, rate] = tail else {
                    return Err(perr(line, "link needs a side (lan|wan) and a rate in bps"));
                };
                let rate: u64 = parse_num(rate, line, "rate")?;
                match *which {
                    "lan" => scenario.lan_rate = rate,
                    "wan" => scenario.wan_rate = rate,
                    other => return Err(perr(line, format_args!("unknown link {other:?}"))),
                }
            }
            "placement" => {
                let [value] = tail else {
                    return Err(perr(line, "placement needs outgoing|incoming|disabled"));
                };
                scenario.placement = match *value {
                    "outgoing" => Placement::OutgoingBound,
                    "incoming" => Placement::IncomingBound,
                    "disabled" => Placement::Disabled,
                    other => return Err(perr(line, format_args!("unknown placement {other:?}"))),
                };
            }
            "measured" => {
                let [value] = tail else {
                    return Err(perr(line, "measured needs outgoing|incoming"));
                };
                scenario.measured = match *value {
                    "outgoing" => Some(Direction::Outgoing),
                    "incoming" => Some(Direction::Incoming),
                    other => return Err(perr(line, format_args!("unknown direction {other:?}"))),
                };
            }
            "classify_cost" => {
                let [value] = tail else {
                    return Err(perr(line, "classify_cost needs microseconds"));
                };
                scenario.classify_cost_us = parse_num(value, line, "classify_cost")?;
            }
            "seed" => {
                let [value] = tail else {
                    return Err(perr(line, "seed needs an integer"));
                };
                scenario.seed = parse_num(value, line, "seed")?;
            }
            "duration" => {
                let [value] = tail else {
                    return Err(perr(line, "duration needs seconds"));
                };
                scenario.duration_us = seconds_to_us(value, line, "duration")?;
            }
            "source" => scenario.sources.push(parse_source(tail, line)?),
            "group" | "default" => policy_lines.push((line, raw)),
            other => return Err(perr(line, format_args!("unknown directive {other:?}"))),
        }
    }

    if !policy_lines.is_empty() {
        let mut text = String::new();
        for (_, raw) in &policy_lines {
            text.push_str(raw);
            text.push('\n');
        }
        let config = parse_policy(&text).map_err(|e| {
            let orig = policy_lines
                .get(e.line.saturating_sub(1))
                .map(|(l, _)| *l)
                .unwrap_or(0);
            perr(orig, &e)
        })?;
        let policy = validate_policy(&config).map_err(|errs| {
            let mut msg = String::from("invalid policy: ");
            for (i, e) in errs.iter().enumerate() {
                if i > 0 {
                    msg.push_str("; ");
                }
                let _ = fmt::write(&mut msg, format_args!("{e}"));
            }
            perr(policy_lines[0].0, msg)
        })?;
        scenario.policy = Some(policy);
    }

    Ok(scenario)
}
