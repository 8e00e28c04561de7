//! Bandwidth-sharing policy model: named groups with percentage shares and
//! the match rules that steer packets into them.
//!
//! A policy goes through two stages. [`PolicyConfig`] is the structurally
//! well-formed form produced by [`parse_policy`] or built programmatically;
//! nothing about it is guaranteed beyond shape. [`validate_policy`] checks the
//! semantic rules (shares sum to 100, unique names, sane prefixes, ...) and
//! compiles the flattened first-match rule table the classifier runs against.

mod parse;

pub use parse::{parse_policy, ParseErrorKind, PolicyParseError};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

/// An IPv4 address or prefix. `len == 32` is a host match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpPrefix {
    pub addr: Ipv4Addr,
    pub len: u8,
}

impl IpPrefix {
    pub fn host(addr: Ipv4Addr) -> Self {
        IpPrefix { addr, len: 32 }
    }

    pub fn new(addr: Ipv4Addr, len: u8) -> Self {
        IpPrefix { addr, len }
    }

    fn mask(&self) -> u32 {
        match self.len.min(32) {
            0 => 0,
            n => u32::MAX << (32 - n),
        }
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        let m = self.mask();
        u32::from(addr) & m == u32::from(self.addr) & m
    }
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len == 32 {
            write!(f, "{}", self.addr)
        } else {
            write!(f, "{}/{}", self.addr, self.len)
        }
    }
}

/// Which packet header an address clause was written against. Matching is
/// direction-driven either way (see [`crate::engine::classify`]); the field
/// is kept so a policy file round-trips exactly and so the selector kind can
/// be reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressField {
    Source,
    Destination,
}

/// Protocol constraint on a rule. `Any` is the default and is not written
/// out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtoRule {
    #[default]
    Any,
    Tcp,
    Udp,
}

/// What a rule selects on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    SourceAddress,
    DestinationAddress,
    WellKnownPort,
    AddressAndPort,
}

/// One classification rule: every present constraint must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchRule {
    pub address: Option<(AddressField, IpPrefix)>,
    pub port: Option<u16>,
    pub proto: ProtoRule,
}

impl MatchRule {
    /// The selector kind this rule represents, or `None` for a rule that
    /// constrains nothing but protocol (rejected by validation).
    pub fn selector(&self) -> Option<Selector> {
        match (self.address, self.port) {
            (Some((AddressField::Source, _)), None) => Some(Selector::SourceAddress),
            (Some((AddressField::Destination, _)), None) => Some(Selector::DestinationAddress),
            (None, Some(_)) => Some(Selector::WellKnownPort),
            (Some(_), Some(_)) => Some(Selector::AddressAndPort),
            (None, None) => None,
        }
    }
}

/// A named group and the rules that feed it. `share_percent` is the slice of
/// the shaped link the group is entitled to, in whole percent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPolicy {
    pub name: String,
    pub share_percent: u32,
    pub rules: Vec<MatchRule>,
}

/// How the policy as a whole groups traffic. Derived from the rule shapes;
/// informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingMethod {
    ByAddress,
    ByApplication,
    ByBoth,
}

impl GroupingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupingMethod::ByAddress => "by-address",
            GroupingMethod::ByApplication => "by-application",
            GroupingMethod::ByBoth => "by-both",
        }
    }

    pub fn derive(groups: &[GroupPolicy]) -> Self {
        let mut any_addr = false;
        let mut any_port = false;
        for g in groups {
            for r in &g.rules {
                match (r.address.is_some(), r.port.is_some()) {
                    (true, true) => return GroupingMethod::ByBoth,
                    (true, false) => any_addr = true,
                    (false, true) => any_port = true,
                    (false, false) => {}
                }
            }
        }
        match (any_addr, any_port) {
            (true, true) => GroupingMethod::ByBoth,
            (false, true) => GroupingMethod::ByApplication,
            _ => GroupingMethod::ByAddress,
        }
    }
}

/// Structurally well-formed policy, not yet semantically checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub groups: Vec<GroupPolicy>,
    /// Index into `groups` for unmatched packets.
    pub default_group: usize,
    pub grouping_method: GroupingMethod,
}

/// One entry of the flattened classifier table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleEntry {
    pub rule: MatchRule,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupShare {
    pub name: String,
    pub share_percent: u32,
}

/// A policy that passed [`validate_policy`]: shares sum to 100, names are
/// unique, and `rule_table` holds every rule in declaration order
/// (first match wins).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedPolicy {
    pub groups: Vec<GroupShare>,
    pub rule_table: Vec<RuleEntry>,
    pub default_group: usize,
    pub grouping_method: GroupingMethod,
}

impl ValidatedPolicy {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn shares(&self) -> impl Iterator<Item = u32> + '_ {
        self.groups.iter().map(|g| g.share_percent)
    }

    /// Canonical text form. One line per rule (a rule-less group gets a bare
    /// line), clauses in `src|dst, port, proto` order, `default` always
    /// written. `parse_policy` followed by `validate_policy` reproduces the
    /// policy exactly.
    pub fn to_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        for (idx, g) in self.groups.iter().enumerate() {
            let rules: Vec<&RuleEntry> =
                self.rule_table.iter().filter(|e| e.group == idx).collect();
            if rules.is_empty() {
                let _ = writeln!(out, "group {} {}", g.name, g.share_percent);
            }
            for entry in rules {
                let _ = write!(out, "group {} {}", g.name, g.share_percent);
                if let Some((field, prefix)) = entry.rule.address {
                    let kw = match field {
                        AddressField::Source => "src",
                        AddressField::Destination => "dst",
                    };
                    let _ = write!(out, " {kw} {prefix}");
                }
                if let Some(port) = entry.rule.port {
                    let _ = write!(out, " port {port}");
                }
                match entry.rule.proto {
                    ProtoRule::Any => {}
                    ProtoRule::Tcp => out.push_str(" proto tcp"),
                    ProtoRule::Udp => out.push_str(" proto udp"),
                }
                out.push('\n');
            }
        }
        let _ = writeln!(out, "default {}", self.groups[self.default_group].name);
        out
    }
}

/// A single semantic defect found by [`validate_policy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyError {
    EmptyGroups,
    ShareSum { sum: u32 },
    ShareOutOfRange { group: String, share: u32 },
    DuplicateName { name: String },
    BadDefaultIndex { index: usize, groups: usize },
    BadPrefixLength { group: String, len: u8 },
    BadName { name: String },
    EmptyRule { group: String },
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::EmptyGroups => write!(f, "policy declares no groups"),
            PolicyError::ShareSum { sum } => {
                write!(f, "shares must sum to exactly 100, got {sum}")
            }
            PolicyError::ShareOutOfRange { group, share } => {
                write!(f, "group {group}: share {share} outside 1..=100")
            }
            PolicyError::DuplicateName { name } => write!(f, "duplicate group name {name}"),
            PolicyError::BadDefaultIndex { index, groups } => {
                write!(f, "default group index {index} out of range ({groups} groups)")
            }
            PolicyError::BadPrefixLength { group, len } => {
                write!(f, "group {group}: prefix length {len} exceeds 32")
            }
            PolicyError::BadName { name } => {
                write!(f, "group name {name:?} must be non-empty [A-Za-z0-9_.-]")
            }
            PolicyError::EmptyRule { group } => {
                write!(f, "group {group}: rule must select on an address or a port")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PolicyError {}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Check every semantic invariant and compile the first-match rule table.
/// All defects are reported, not just the first.
pub fn validate_policy(config: &PolicyConfig) -> Result<ValidatedPolicy, Vec<PolicyError>> {
    let mut errors = Vec::new();

    if config.groups.is_empty() {
        errors.push(PolicyError::EmptyGroups);
    }

    let sum: u32 = config.groups.iter().map(|g| g.share_percent).sum();
    if !config.groups.is_empty() && sum != 100 {
        errors.push(PolicyError::ShareSum { sum });
    }

    for (i, g) in config.groups.iter().enumerate() {
        if !valid_name(&g.name) {
            errors.push(PolicyError::BadName {
                name: g.name.clone(),
            });
        }
        if !(1..=100).contains(&g.share_percent) {
            errors.push(PolicyError::ShareOutOfRange {
                group: g.name.clone(),
                share: g.share_percent,
            });
        }
        if config.groups[..i].iter().any(|prev| prev.name == g.name) {
            errors.push(PolicyError::DuplicateName {
                name: g.name.clone(),
            });
        }
        for rule in &g.rules {
            if rule.selector().is_none() {
                errors.push(PolicyError::EmptyRule {
                    group: g.name.clone(),
                });
            }
            if let Some((_, prefix)) = rule.address {
                if prefix.len > 32 {
                    errors.push(PolicyError::BadPrefixLength {
                        group: g.name.clone(),
                        len: prefix.len,
                    });
                }
            }
        }
    }

    if config.default_group >= config.groups.len() {
        errors.push(PolicyError::BadDefaultIndex {
            index: config.default_group,
            groups: config.groups.len(),
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut rule_table = Vec::new();
    for (idx, g) in config.groups.iter().enumerate() {
        for rule in &g.rules {
            rule_table.push(RuleEntry { rule: *rule, group: idx });
        }
    }

    Ok(ValidatedPolicy {
        groups: config
            .groups
            .iter()
            .map(|g| GroupShare {
                name: g.name.clone(),
                share_percent: g.share_percent,
            })
            .collect(),
        rule_table,
        default_group: config.default_group,
        grouping_method: config.grouping_method,
    })
}
