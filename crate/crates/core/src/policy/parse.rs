//! Line-oriented policy text format.
//!
//! ```text
//! # LAN stations get even halves, everything else falls into stationA
//! group stationA 50 src 10.0.0.1
//! group stationB 50 src 10.0.0.2
//! default stationA
//! ```
//!
//! One line describes one group and (optionally) one rule; a group may appear
//! on several lines to collect several rules, as long as every line states
//! the same share. `#` starts a comment, clauses may come in any order, and
//! the `default` line is optional (first group wins when absent).

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::Ipv4Addr;

use super::{
    AddressField, GroupPolicy, GroupingMethod, IpPrefix, MatchRule, PolicyConfig, ProtoRule,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownDirective(String),
    MissingField(&'static str),
    BadShare(String),
    BadAddress(String),
    BadPort(String),
    BadProto(String),
    UnknownClause(String),
    DuplicateClause(&'static str),
    ConflictingShare { group: String },
    DuplicateDefault,
    RuleWithoutSelector,
    UnknownGroup(String),
}

/// Parse failure, pointing at the 1-based offending line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for PolicyParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            ParseErrorKind::UnknownDirective(w) => write!(f, "unknown directive {w:?}"),
            ParseErrorKind::MissingField(what) => write!(f, "expected {what}"),
            ParseErrorKind::BadShare(t) => write!(f, "share {t:?} is not an integer percent"),
            ParseErrorKind::BadAddress(t) => write!(f, "bad address or prefix {t:?}"),
            ParseErrorKind::BadPort(t) => write!(f, "bad port {t:?}"),
            ParseErrorKind::BadProto(t) => write!(f, "bad protocol {t:?} (tcp or udp)"),
            ParseErrorKind::UnknownClause(w) => write!(f, "unknown selector keyword {w:?}"),
            ParseErrorKind::DuplicateClause(what) => write!(f, "duplicate {what} clause"),
            ParseErrorKind::ConflictingShare { group } => {
                write!(f, "group {group} restated with a different share")
            }
            ParseErrorKind::DuplicateDefault => write!(f, "default already declared"),
            ParseErrorKind::RuleWithoutSelector => {
                write!(f, "rule must select on an address or a port")
            }
            ParseErrorKind::UnknownGroup(name) => write!(f, "unknown group {name:?}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PolicyParseError {}

fn err(line: usize, kind: ParseErrorKind) -> PolicyParseError {
    PolicyParseError { line, kind }
}

fn parse_prefix(token: &str, line: usize) -> Result<IpPrefix, PolicyParseError> {
    let bad = || err(line, ParseErrorKind::BadAddress(token.to_owned()));
    match token.split_once('/') {
        None => {
            let addr: Ipv4Addr = token.parse().map_err(|_| bad())?;
            Ok(IpPrefix::host(addr))
        }
        Some((addr, len)) => {
            let addr: Ipv4Addr = addr.parse().map_err(|_| bad())?;
            let len: u8 = len.parse().map_err(|_| bad())?;
            Ok(IpPrefix::new(addr, len))
        }
    }
}

/// Parse one `group` line's tail: `<name> <share> [clauses...]`.
fn parse_group_line(
    tokens: &[&str],
    line: usize,
) -> Result<(String, u32, Option<MatchRule>), PolicyParseError> {
    let name = *tokens
        .first()
        .ok_or_else(|| err(line, ParseErrorKind::MissingField("group name")))?;
    let share_tok = *tokens
        .get(1)
        .ok_or_else(|| err(line, ParseErrorKind::MissingField("share percent")))?;
    let share: u32 = share_tok
        .parse()
        .map_err(|_| err(line, ParseErrorKind::BadShare(share_tok.to_owned())))?;

    let mut rule = MatchRule::default();
    let mut saw_proto = false;
    let mut rest = &tokens[2..];
    while let Some((&kw, tail)) = rest.split_first() {
        let value = *tail
            .first()
            .ok_or_else(|| err(line, ParseErrorKind::MissingField("clause value")))?;
        match kw {
            "src" | "dst" => {
                if rule.address.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateClause("address")));
                }
                let field = if kw == "src" {
                    AddressField::Source
                } else {
                    AddressField::Destination
                };
                rule.address = Some((field, parse_prefix(value, line)?));
            }
            "port" => {
                if rule.port.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateClause("port")));
                }
                let port: u16 = value
                    .parse()
                    .map_err(|_| err(line, ParseErrorKind::BadPort(value.to_owned())))?;
                rule.port = Some(port);
            }
            "proto" => {
                if saw_proto {
                    return Err(err(line, ParseErrorKind::DuplicateClause("proto")));
                }
                saw_proto = true;
                rule.proto = match value {
                    "tcp" => ProtoRule::Tcp,
                    "udp" => ProtoRule::Udp,
                    other => return Err(err(line, ParseErrorKind::BadProto(other.to_owned()))),
                };
            }
            other => return Err(err(line, ParseErrorKind::UnknownClause(other.to_owned()))),
        }
        rest = &tail[1..];
    }

    let has_clauses = rule.address.is_some() || rule.port.is_some() || saw_proto;
    let rule = if has_clauses {
        if rule.selector().is_none() {
            return Err(err(line, ParseErrorKind::RuleWithoutSelector));
        }
        Some(rule)
    } else {
        None
    };
    Ok((name.to_owned(), share, rule))
}

/// Parse policy text into a structurally well-formed [`PolicyConfig`].
/// Semantic invariants (share sum, uniqueness, ...) are left to
/// [`super::validate_policy`].
pub fn parse_policy(text: &str) -> Result<PolicyConfig, PolicyParseError> {
    let mut groups: Vec<GroupPolicy> = Vec::new();
    let mut default_name: Option<(String, usize)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&directive, tail)) = tokens.split_first() else {
            continue;
        };
        match directive {
            "group" => {
                let (name, share, rule) = parse_group_line(tail, line)?;
                if let Some(existing) = groups.iter_mut().find(|g| g.name == name) {
                    if existing.share_percent != share {
                        return Err(err(line, ParseErrorKind::ConflictingShare { group: name }));
                    }
                    existing.rules.extend(rule);
                } else {
                    groups.push(GroupPolicy {
                        name,
                        share_percent: share,
                        rules: rule.into_iter().collect(),
                    });
                }
            }
            "default" => {
                if default_name.is_some() {
                    return Err(err(line, ParseErrorKind::DuplicateDefault));
                }
                let name = *tail
                    .first()
                    .ok_or_else(|| err(line, ParseErrorKind::MissingField("default group name")))?;
                default_name = Some((name.to_owned(), line));
            }
            other => {
                return Err(err(line, ParseErrorKind::UnknownDirective(other.to_owned())));
            }
        }
    }

    let default_group = match default_name {
        None => 0,
        Some((name, line)) => groups
            .iter()
            .position(|g| g.name == name)
            .ok_or_else(|| err(line, ParseErrorKind::UnknownGroup(name)))?,
    };

    let grouping_method = GroupingMethod::derive(&groups);
    Ok(PolicyConfig {
        groups,
        default_group,
        grouping_method,
    })
}
