//! Property tests for the shaping engine: classifier equivalence against a
//! straight-line reference, per-group FIFO order, counter conservation, and
//! fair division of a backlogged link.

use core::net::Ipv4Addr;

use proptest::prelude::*;

use gwshape_core::engine::{quantum_unit, EngineConfig, ShapingEngine};
use gwshape_core::packet::{Direction, Packet, Protocol};
use gwshape_core::policy::{
    validate_policy, AddressField, GroupPolicy, GroupingMethod, IpPrefix, MatchRule, PolicyConfig,
    ProtoRule, ValidatedPolicy,
};

/// First-match-wins classification restated from scratch: walk the table,
/// test the direction-relevant address, the connection's well-known port,
/// and the protocol; fall through to the default group.
fn reference_classify(policy: &ValidatedPolicy, pkt: &Packet, dir: Direction) -> usize {
    for entry in &policy.rule_table {
        let rule = entry.rule;
        let addr_ok = rule.address.map_or(true, |(_, prefix)| {
            let local = match dir {
                Direction::Outgoing => pkt.src_addr,
                Direction::Incoming => pkt.dst_addr,
            };
            prefix.contains(local)
        });
        let port_ok = rule
            .port
            .map_or(true, |p| pkt.well_known_port() == Some(p));
        let proto_ok = match rule.proto {
            ProtoRule::Any => true,
            ProtoRule::Tcp => pkt.protocol == Protocol::Tcp,
            ProtoRule::Udp => pkt.protocol == Protocol::Udp,
        };
        if addr_ok && port_ok && proto_ok {
            return entry.group;
        }
    }
    policy.default_group
}

/// Addresses drawn from a small pool so rules genuinely hit.
fn arb_addr() -> impl Strategy<Value = Ipv4Addr> {
    (0u8..2, 0u8..8).prop_map(|(net, host)| Ipv4Addr::new(10, 0, net, host))
}

fn arb_port() -> impl Strategy<Value = u16> {
    prop_oneof![
        Just(21u16),
        Just(25),
        Just(80),
        Just(443),
        40_000u16..50_000,
    ]
}

fn arb_packet() -> impl Strategy<Value = Packet> {
    (
        arb_addr(),
        arb_addr(),
        arb_port(),
        arb_port(),
        any::<bool>(),
        64u32..=1500,
    )
        .prop_map(|(src, dst, sport, dport, tcp, size)| {
            Packet::new(
                src,
                dst,
                sport,
                dport,
                if tcp { Protocol::Tcp } else { Protocol::Udp },
                size,
                0,
                0,
            )
        })
}

fn arb_rule() -> impl Strategy<Value = MatchRule> {
    let prefix = (arb_addr(), prop_oneof![Just(24u8), Just(29), Just(32)])
        .prop_map(|(a, len)| IpPrefix::new(a, len));
    let field = prop_oneof![
        Just(AddressField::Source),
        Just(AddressField::Destination)
    ];
    let proto = prop_oneof![
        Just(ProtoRule::Any),
        Just(ProtoRule::Tcp),
        Just(ProtoRule::Udp)
    ];
    (
        (field, prefix),
        prop_oneof![Just(21u16), Just(25), Just(80), Just(443)],
        proto,
        0u8..3,
    )
        .prop_map(|(addr, port, proto, shape)| MatchRule {
            address: (shape != 1).then_some(addr),
            port: (shape != 0).then_some(port),
            proto,
        })
}

fn arb_policy() -> impl Strategy<Value = ValidatedPolicy> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                proptest::collection::btree_set(1u32..100, n - 1),
                proptest::collection::vec(proptest::collection::vec(arb_rule(), 0..=3), n),
                0..n,
            )
        })
        .prop_map(|(cuts, rules, default_group)| {
            let mut shares = Vec::new();
            let mut prev = 0;
            for c in cuts {
                shares.push(c - prev);
                prev = c;
            }
            shares.push(100 - prev);
            let groups: Vec<GroupPolicy> = shares
                .into_iter()
                .zip(rules)
                .enumerate()
                .map(|(i, (share_percent, rules))| GroupPolicy {
                    name: format!("g{i}"),
                    share_percent,
                    rules,
                })
                .collect();
            let grouping_method = GroupingMethod::derive(&groups);
            validate_policy(&PolicyConfig {
                groups,
                default_group,
                grouping_method,
            })
            .expect("generated policies are valid")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classifier_matches_reference(
        policy in arb_policy(),
        packets in proptest::collection::vec(arb_packet(), 1..64),
        incoming in any::<bool>(),
    ) {
        let dir = if incoming { Direction::Incoming } else { Direction::Outgoing };
        let engine = ShapingEngine::new(policy.clone(), dir, EngineConfig::default());
        for pkt in &packets {
            prop_assert_eq!(engine.classify(pkt), reference_classify(&policy, pkt, dir));
        }
    }

    /// Random interleavings of enqueues and wire pops: within each group,
    /// packets leave in arrival order, and the offered/served/dropped/queued
    /// identity holds at every step.
    #[test]
    fn fifo_order_and_conservation_hold_under_random_traces(
        policy in arb_policy(),
        ops in proptest::collection::vec(
            prop_oneof![3 => arb_packet().prop_map(Some), 2 => Just(None)],
            1..400,
        ),
    ) {
        let mut engine = ShapingEngine::new(
            policy.clone(),
            Direction::Outgoing,
            EngineConfig { queue_capacity: 16, tx_depth: 2 },
        );
        let groups = policy.group_count();
        let mut shadow: Vec<std::collections::VecDeque<u64>> =
            vec![std::collections::VecDeque::new(); groups];
        let mut popped = 0u64;

        for (i, op) in ops.iter().enumerate() {
            match op {
                Some(pkt) => {
                    let mut pkt = *pkt;
                    pkt.created_at = i as u64; // unique identity tag
                    let outcome = engine.enqueue(pkt, i as u64);
                    if outcome.accepted() {
                        shadow[outcome.group()].push_back(pkt.created_at);
                    }
                }
                None => {
                    if let Some(out) = engine.pop_for_wire() {
                        popped += 1;
                        let g = engine.classify(&out);
                        let expect = shadow[g].pop_front();
                        prop_assert_eq!(Some(out.created_at), expect, "group {} out of order", g);
                    }
                }
            }
            let counters = engine.snapshot_counters();
            let mut enq = 0u64;
            let mut dropped = 0u64;
            let mut queued = 0u64;
            for c in &counters {
                enq += c.enqueued;
                dropped += c.dropped;
                queued += c.queue_len as u64;
            }
            prop_assert_eq!(enq, popped + dropped + queued + engine.tx_len() as u64);
        }

        // Drain: everything still queued pops in shadow order.
        while let Some(out) = engine.pop_for_wire() {
            let g = engine.classify(&out);
            prop_assert_eq!(Some(out.created_at), shadow[g].pop_front());
        }
        prop_assert!(shadow.iter().all(|q| q.is_empty()));
    }

    /// Identical operation sequences give identical behavior, pop for pop.
    #[test]
    fn engine_is_deterministic(
        policy in arb_policy(),
        packets in proptest::collection::vec(arb_packet(), 1..128),
    ) {
        let run = || {
            let mut engine = ShapingEngine::new(
                policy.clone(),
                Direction::Outgoing,
                EngineConfig::default(),
            );
            for (i, pkt) in packets.iter().enumerate() {
                engine.enqueue(*pkt, i as u64);
            }
            let mut order = Vec::new();
            while let Some(p) = engine.pop_for_wire() {
                order.push((p.src_addr, p.size));
            }
            (order, engine.snapshot_counters())
        };
        prop_assert_eq!(run(), run());
    }

    /// Two always-backlogged groups split served bytes by their shares, to
    /// within one round's slack of each.
    #[test]
    fn backlogged_split_tracks_shares(share in 1u32..100, seed_size in 0usize..3) {
        let sizes = [1500u32, 1100, 700];
        let size = sizes[seed_size];
        let policy = validate_policy(&PolicyConfig {
            groups: vec![
                GroupPolicy {
                    name: "a".into(),
                    share_percent: share,
                    rules: vec![MatchRule {
                        address: Some((
                            AddressField::Source,
                            IpPrefix::host(Ipv4Addr::new(10, 0, 0, 1)),
                        )),
                        port: None,
                        proto: ProtoRule::Any,
                    }],
                },
                GroupPolicy {
                    name: "b".into(),
                    share_percent: 100 - share,
                    rules: vec![],
                },
            ],
            default_group: 1,
            grouping_method: GroupingMethod::ByAddress,
        })
        .unwrap();

        let mut engine = ShapingEngine::new(
            policy,
            Direction::Outgoing,
            EngineConfig { queue_capacity: 4000, tx_depth: 2 },
        );
        let mk = |host: u8, tag: u64| {
            Packet::new(
                Ipv4Addr::new(10, 0, 0, host),
                Ipv4Addr::new(192, 168, 1, 1),
                40_000,
                21,
                Protocol::Tcp,
                size,
                0,
                tag,
            )
        };
        for i in 0..3000u64 {
            engine.enqueue(mk(1, i), i);
            engine.enqueue(mk(2, i), i);
        }

        let mut bytes = [0u64; 2];
        for _ in 0..1000 {
            let p = engine.pop_for_wire().expect("backlogged");
            bytes[engine.classify(&p)] += u64::from(p.size);
        }
        let total = bytes[0] + bytes[1];
        let unit = quantum_unit(share.min(100 - share));
        // DRR bound: per-group deviation from entitlement is at most one
        // quantum plus one packet over any whole number of rounds; pops cut
        // a round anywhere, so allow that slack on both groups.
        let slack = (unit * u64::from(share.max(100 - share)) + 1500) as f64;
        let want = total as f64 * f64::from(share) / 100.0;
        prop_assert!(
            (bytes[0] as f64 - want).abs() <= slack,
            "share {share}: got {} want {want} of {total} (slack {slack})",
            bytes[0],
        );
    }
}
