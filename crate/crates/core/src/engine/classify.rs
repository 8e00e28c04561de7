use crate::packet::{Direction, Packet, Protocol};
use crate::policy::{MatchRule, ProtoRule, ValidatedPolicy};

/// Pick the group for a packet: first matching rule in table order wins,
/// otherwise the policy's default group.
///
/// Address rules name the station (or prefix) of interest, so the compared
/// header follows the bound: on the outgoing bound the station is the
/// sender (`src_addr`), on the incoming bound it is the receiver
/// (`dst_addr`). Port rules compare against the connection's well-known
/// port, which reads the same from both sides.
pub fn classify(policy: &ValidatedPolicy, pkt: &Packet, direction: Direction) -> usize {
    policy
        .rule_table
        .iter()
        .find(|entry| rule_matches(&entry.rule, pkt, direction))
        .map(|entry| entry.group)
        .unwrap_or(policy.default_group)
}

fn rule_matches(rule: &MatchRule, pkt: &Packet, direction: Direction) -> bool {
    if let Some((_, prefix)) = rule.address {
        let station_side = match direction {
            Direction::Outgoing => pkt.src_addr,
            Direction::Incoming => pkt.dst_addr,
        };
        if !prefix.contains(station_side) {
            return false;
        }
    }
    if let Some(port) = rule.port {
        if pkt.well_known_port() != Some(port) {
            return false;
        }
    }
    match rule.proto {
        ProtoRule::Any => true,
        ProtoRule::Tcp => pkt.protocol == Protocol::Tcp,
        ProtoRule::Udp => pkt.protocol == Protocol::Udp,
    }
}
