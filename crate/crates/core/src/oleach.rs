//! O-LEACH orphan recovery.
//!
//! After clusters form, orphans (alive nodes with no head in range) look for
//! a cluster member within range. The chosen member becomes a gateway, the
//! orphan nearest to it becomes the sub-cluster head (CH'), and the CH'
//! collects the other orphans in range. Data then flows
//! orphan → CH' → gateway → CH → sink, the gateway using one extra slot in its
//! head's frame for the relayed aggregate.
//!
//! Message sequence, all control messages sized `control_bits`:
//!
//! 1. each orphan broadcasts a status message at `tx_range`;
//! 2. members that heard a status are gateway candidates; each orphan picks
//!    the nearest one, which broadcasts "I am a gateway" at `tx_range`;
//! 3. each attached orphan receives the reply and sends a join to its gateway;
//! 4. the gateway tells its head how many slots to reserve;
//! 5. the head reserves them (its schedule broadcast follows);
//! 6. the gateway hands the reservation to the CH', which broadcasts the
//!    sub-frame to its orphan members.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Result, SimError};
use crate::leach::{
    collect_and_forward, nearest_within, unicast, ClusterAssignment, HeldRelay, RoundReport,
    Slot, SlotKind, TdmaSchedule,
};
use crate::net::{EnergyLedger, Network, NodeId, Role};
use crate::radio::{aggregation_cost, rx_cost, tx_cost, RadioParams};

/// Orphans attached to one gateway before the CH' is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayGroup {
    pub gateway: NodeId,
    pub parent_head: NodeId,
    /// Ascending id.
    pub orphans: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Handshake {
    /// One group per gateway, ascending gateway id.
    pub groups: Vec<GatewayGroup>,
    /// Orphans that heard no cluster member.
    pub unreachable: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubCluster {
    pub gateway: NodeId,
    pub head_prime: NodeId,
    /// Orphans served by the CH', excluding the CH' itself. Ascending id.
    pub members: Vec<NodeId>,
    pub parent_head: NodeId,
    /// Slots the CH' hands out to its orphan members.
    pub reserved_slots: usize,
}

impl SubCluster {
    /// CH' plus its members.
    pub fn recovered(&self) -> usize {
        self.members.len() + 1
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OrphanReport {
    pub total_orphans: usize,
    pub recovered: usize,
    pub unreachable: usize,
    pub gateways: usize,
}

impl OrphanReport {
    /// Report for a round in which no recovery is attempted.
    pub fn unrecovered(total_orphans: usize) -> Self {
        Self {
            total_orphans,
            recovered: 0,
            unreachable: total_orphans,
            gateways: 0,
        }
    }
}

/// Alive nodes left without a head in range.
pub fn detect_orphans(net: &Network, assignment: &ClusterAssignment) -> BTreeSet<NodeId> {
    assignment
        .unassigned
        .iter()
        .copied()
        .filter(|&id| net.is_alive(id))
        .collect()
}

/// Orphan status broadcast, gateway offer and join.
pub fn gateway_handshake(
    net: &mut Network,
    assignment: &ClusterAssignment,
    orphans: &BTreeSet<NodeId>,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<Handshake> {
    if orphans.is_empty() {
        return Ok(Handshake::default());
    }
    let range = net.config.tx_range;
    let ctrl = net.config.control_bits;

    let mut senders = Vec::new();
    for &o in orphans {
        if net.spend(o, tx_cost(ctrl, range, radio), ledger)? {
            senders.push(o);
        }
    }

    let members: Vec<NodeId> = assignment
        .membership
        .keys()
        .copied()
        .filter(|&m| net.is_alive(m))
        .collect();
    let mut candidates = Vec::new();
    for &m in &members {
        let mut heard = false;
        for &o in &senders {
            if net.distance(m, o) <= range && net.spend(m, rx_cost(ctrl, radio), ledger)? {
                heard = true;
            }
        }
        if heard && net.is_alive(m) {
            candidates.push(m);
        }
    }

    let mut attached: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut unreachable = BTreeSet::new();
    for &o in orphans {
        if !net.is_alive(o) {
            unreachable.insert(o);
            continue;
        }
        match nearest_within(net, o, &candidates, range) {
            Some((g, _)) => attached.entry(g).or_default().push(o),
            None => {
                unreachable.insert(o);
            }
        }
    }

    let mut groups = Vec::new();
    for (gateway, list) in attached {
        if !net.spend(gateway, tx_cost(ctrl, range, radio), ledger)? {
            unreachable.extend(list);
            continue;
        }
        let mut joined = Vec::new();
        for o in list {
            let heard = net.spend(o, rx_cost(ctrl, radio), ledger)?;
            if heard && unicast(net, o, gateway, ctrl, radio, ledger)? {
                joined.push(o);
            } else {
                unreachable.insert(o);
            }
        }
        if !net.is_alive(gateway) {
            unreachable.extend(joined);
            continue;
        }
        if joined.is_empty() {
            continue;
        }
        let parent_head = assignment
            .head_of(gateway)
            .ok_or_else(|| SimError::Invariant(format!("gateway {gateway} has no head")))?;
        net.set_role(gateway, Role::Gateway);
        groups.push(GatewayGroup {
            gateway,
            parent_head,
            orphans: joined,
        });
    }
    Ok(Handshake {
        groups,
        unreachable,
    })
}

/// The attached orphan nearest to the gateway; ties go to the lower id.
pub fn elect_sub_cluster_head(group: &GatewayGroup, net: &Network) -> Result<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for &o in &group.orphans {
        let d = net.distance(o, group.gateway);
        if best.is_none_or(|(b, bd)| d < bd || (d == bd && o < b)) {
            best = Some((o, d));
        }
    }
    best.map(|(o, _)| o)
        .ok_or(SimError::EmptySubCluster(group.gateway))
}

/// Elects the CH' and keeps the attached orphans within its range.
///
/// Returns the sub-cluster and the attached orphans the CH' cannot reach.
pub fn form_sub_cluster(
    group: &GatewayGroup,
    net: &mut Network,
) -> Result<(SubCluster, Vec<NodeId>)> {
    let head_prime = elect_sub_cluster_head(group, net)?;
    let range = net.config.tx_range;
    let (members, dropped): (Vec<NodeId>, Vec<NodeId>) = group
        .orphans
        .iter()
        .copied()
        .filter(|&o| o != head_prime)
        .partition(|&o| net.distance(o, head_prime) <= range);
    net.set_role(head_prime, Role::SubClusterHead);
    let sub = SubCluster {
        gateway: group.gateway,
        head_prime,
        reserved_slots: members.len(),
        members,
        parent_head: group.parent_head,
    };
    Ok((sub, dropped))
}

/// Adds the gateway relay slots and CH' sub-frames to `schedule` and charges
/// the reservation messages.
///
/// The relay slot sits immediately before the gateway's own data slot, so the
/// head hears the sub-cluster aggregate first.
pub fn extend_tdma(
    net: &mut Network,
    schedule: &mut TdmaSchedule,
    subs: &[SubCluster],
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<()> {
    let range = net.config.tx_range;
    let ctrl = net.config.control_bits;
    for sub in subs {
        let frame = schedule.frames.get_mut(&sub.parent_head).ok_or_else(|| {
            SimError::Invariant(format!("no frame for head {}", sub.parent_head))
        })?;
        let own = frame
            .iter()
            .position(|s| s.node == sub.gateway && s.kind == SlotKind::Data)
            .ok_or_else(|| {
                SimError::Invariant(format!("gateway {} holds no data slot", sub.gateway))
            })?;
        frame.insert(own, Slot::relay(sub.gateway));
        schedule
            .sub_frames
            .insert(sub.head_prime, sub.members.clone());

        unicast(net, sub.gateway, sub.parent_head, ctrl, radio, ledger)?;
        let informed = unicast(net, sub.gateway, sub.head_prime, ctrl, radio, ledger)?;
        if informed
            && !sub.members.is_empty()
            && net.spend(sub.head_prime, tx_cost(ctrl, range, radio), ledger)?
        {
            for &m in &sub.members {
                net.spend(m, rx_cost(ctrl, radio), ledger)?;
            }
        }
    }
    Ok(())
}

/// Everything the recovery phase produced in one round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Recovery {
    pub subs: Vec<SubCluster>,
    pub unreachable: BTreeSet<NodeId>,
    pub report: OrphanReport,
}

/// Detection, handshake, CH' election and slot reservation in one pass.
pub fn recover_orphans(
    net: &mut Network,
    assignment: &ClusterAssignment,
    schedule: &mut TdmaSchedule,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<Recovery> {
    let orphans = detect_orphans(net, assignment);
    let handshake = gateway_handshake(net, assignment, &orphans, radio, ledger)?;
    let mut unreachable = handshake.unreachable;
    let mut subs = Vec::with_capacity(handshake.groups.len());
    for group in &handshake.groups {
        let (sub, dropped) = form_sub_cluster(group, net)?;
        unreachable.extend(dropped);
        subs.push(sub);
    }
    extend_tdma(net, schedule, &subs, radio, ledger)?;

    let recovered: usize = subs.iter().map(SubCluster::recovered).sum();
    let report = OrphanReport {
        total_orphans: orphans.len(),
        recovered,
        unreachable: orphans.len() - recovered,
        gateways: subs.len(),
    };
    debug_assert_eq!(report.unreachable, unreachable.len());
    Ok(Recovery {
        subs,
        unreachable,
        report,
    })
}

/// Steady state with sub-clusters.
///
/// Sub-frames run first: orphan members send to their CH', which aggregates
/// and forwards to its gateway. Head frames then run as in LEACH, the gateway
/// sending the held aggregate in its relay slot and its own reading next.
pub fn run_steady_state_oleach(
    net: &mut Network,
    assignment: &ClusterAssignment,
    schedule: &TdmaSchedule,
    subs: &[SubCluster],
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<RoundReport> {
    debug_assert!(subs.iter().all(|s| assignment.head_of(s.gateway) == Some(s.parent_head)));
    let l = net.config.packet_bits;
    let mut relays = BTreeMap::new();
    for sub in subs {
        let chp = sub.head_prime;
        if !net.is_alive(chp) {
            continue;
        }
        let mut signals = 0usize;
        let mut sources = vec![chp];
        for &m in schedule.sub_frames.get(&chp).into_iter().flatten() {
            if !net.is_alive(chp) {
                break;
            }
            if unicast(net, m, chp, l, radio, ledger)? {
                signals += 1;
                sources.push(m);
            }
        }
        if !net.spend(chp, aggregation_cost(l, signals + 1, radio), ledger)? {
            continue;
        }
        if unicast(net, chp, sub.gateway, l, radio, ledger)? {
            relays.insert(sub.gateway, HeldRelay { sources });
        }
    }
    let mut report = RoundReport::default();
    collect_and_forward(net, schedule, &relays, radio, ledger, &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leach::{build_tdma_schedule, form_clusters, run_steady_state_leach};
    use crate::net::{Node, NetworkConfig, Position};

    fn layout(points: &[(f64, f64)]) -> Network {
        let config = NetworkConfig::default();
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Node::new(NodeId(i), Position::new(x, y), config.initial_energy))
            .collect();
        Network::from_nodes(config, nodes).unwrap()
    }

    fn ids(v: &[usize]) -> BTreeSet<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn setup(net: &mut Network, heads: &[usize]) -> (ClusterAssignment, EnergyLedger) {
        let mut ledger = EnergyLedger::new(net.len());
        let a = form_clusters(net, &ids(heads), &RadioParams::default(), &mut ledger).unwrap();
        (a, ledger)
    }

    #[test]
    fn no_orphans_when_all_in_range() {
        let mut net = layout(&[(0.0, 0.0), (10.0, 10.0), (20.0, 5.0)]);
        let (a, _) = setup(&mut net, &[0]);
        assert!(detect_orphans(&net, &a).is_empty());
    }

    #[test]
    fn distant_node_is_orphan() {
        let mut net = layout(&[(150.0, 150.0), (10.0, 10.0)]);
        let (a, _) = setup(&mut net, &[0]);
        assert_eq!(detect_orphans(&net, &a), ids(&[1]));
    }

    #[test]
    fn dead_orphan_is_excluded() {
        let mut net = layout(&[(150.0, 150.0), (10.0, 10.0), (290.0, 10.0)]);
        let (a, mut ledger) = setup(&mut net, &[0]);
        net.spend(NodeId(2), 1.0, &mut ledger).unwrap();
        assert_eq!(detect_orphans(&net, &a), ids(&[1]));
    }

    #[test]
    fn empty_handshake() {
        let mut net = layout(&[(0.0, 0.0), (10.0, 0.0)]);
        let (a, mut ledger) = setup(&mut net, &[0]);
        let h = gateway_handshake(&mut net, &a, &BTreeSet::new(), &RadioParams::default(), &mut ledger)
            .unwrap();
        assert!(h.groups.is_empty());
        assert!(h.unreachable.is_empty());
    }

    #[test]
    fn member_in_range_becomes_gateway() {
        // head 0, member 1 at (150,100), orphan 2 at (100,100)
        let mut net = layout(&[(210.0, 100.0), (150.0, 100.0), (100.0, 100.0)]);
        let (a, mut ledger) = setup(&mut net, &[0]);
        let orphans = detect_orphans(&net, &a);
        assert_eq!(orphans, ids(&[2]));
        let h = gateway_handshake(&mut net, &a, &orphans, &RadioParams::default(), &mut ledger)
            .unwrap();
        assert_eq!(
            h.groups,
            vec![GatewayGroup {
                gateway: NodeId(1),
                parent_head: NodeId(0),
                orphans: vec![NodeId(2)]
            }]
        );
        assert_eq!(net.node(NodeId(1)).role, Role::Gateway);
    }

    #[test]
    fn orphan_out_of_member_range_is_unreachable() {
        let mut net = layout(&[(280.0, 280.0), (260.0, 280.0), (10.0, 10.0)]);
        let (a, mut ledger) = setup(&mut net, &[0]);
        let orphans = detect_orphans(&net, &a);
        let h = gateway_handshake(&mut net, &a, &orphans, &RadioParams::default(), &mut ledger)
            .unwrap();
        assert!(h.groups.is_empty());
        assert_eq!(h.unreachable, ids(&[2]));
    }

    #[test]
    fn handshake_costs() {
        let mut net = layout(&[(210.0, 100.0), (150.0, 100.0), (100.0, 100.0)]);
        let (a, _) = setup(&mut net, &[0]);
        let radio = RadioParams::default();
        let mut ledger = EnergyLedger::new(3);
        let orphans = detect_orphans(&net, &a);
        gateway_handshake(&mut net, &a, &orphans, &radio, &mut ledger).unwrap();
        let status = tx_cost(200, 70.0, &radio);
        let rx = rx_cost(200, &radio);
        let join = tx_cost(200, 50.0, &radio);
        assert_eq!(ledger.debit_of(NodeId(2)), status + rx + join);
        assert_eq!(ledger.debit_of(NodeId(1)), rx + tx_cost(200, 70.0, &radio) + rx);
        assert_eq!(ledger.debit_of(NodeId(0)), 0.0);
    }

    fn group(gateway: usize, orphans: &[usize]) -> GatewayGroup {
        GatewayGroup {
            gateway: NodeId(gateway),
            parent_head: NodeId(99),
            orphans: orphans.iter().map(|&i| NodeId(i)).collect(),
        }
    }

    #[test]
    fn single_orphan_heads_itself() {
        let mut net = layout(&[(0.0, 0.0), (30.0, 0.0)]);
        let (sub, dropped) = form_sub_cluster(&group(0, &[1]), &mut net).unwrap();
        assert_eq!(sub.head_prime, NodeId(1));
        assert!(sub.members.is_empty());
        assert!(dropped.is_empty());
    }

    #[test]
    fn nearest_orphan_is_sub_head() {
        let net = layout(&[(0.0, 0.0), (40.0, 0.0), (0.0, 20.0)]);
        assert_eq!(elect_sub_cluster_head(&group(0, &[1, 2]), &net).unwrap(), NodeId(2));
    }

    #[test]
    fn equidistant_orphans_lower_id_wins() {
        let net = layout(&[(100.0, 100.0), (100.0, 130.0), (130.0, 100.0), (70.0, 100.0)]);
        assert_eq!(elect_sub_cluster_head(&group(0, &[3, 2, 1]), &net).unwrap(), NodeId(1));
    }

    #[test]
    fn empty_group_rejected() {
        let net = layout(&[(0.0, 0.0)]);
        assert!(matches!(
            elect_sub_cluster_head(&group(0, &[]), &net),
            Err(SimError::EmptySubCluster(NodeId(0)))
        ));
    }

    #[test]
    fn orphans_beyond_sub_head_are_dropped() {
        // gateway at centre, CH' 10 m left, other orphan 65 m right (75 m from CH')
        let mut net = layout(&[(100.0, 100.0), (90.0, 100.0), (165.0, 100.0)]);
        let (sub, dropped) = form_sub_cluster(&group(0, &[1, 2]), &mut net).unwrap();
        assert_eq!(sub.head_prime, NodeId(1));
        assert!(sub.members.is_empty());
        assert_eq!(dropped, vec![NodeId(2)]);
    }

    #[test]
    fn extend_with_no_subs_is_identity() {
        let mut net = layout(&[(0.0, 0.0), (10.0, 0.0)]);
        let (a, mut ledger) = setup(&mut net, &[0]);
        let base = build_tdma_schedule(&a);
        let mut s = base.clone();
        extend_tdma(&mut net, &mut s, &[], &RadioParams::default(), &mut ledger).unwrap();
        assert_eq!(s, base);
    }

    #[test]
    fn extend_adds_relay_slot_and_sub_frame() {
        let mut net = layout(&[(0.0, 0.0); 7]);
        let mut a = ClusterAssignment {
            heads: ids(&[0]),
            ..Default::default()
        };
        for m in [1, 2, 3] {
            a.membership.insert(NodeId(m), NodeId(0));
        }
        let mut s = build_tdma_schedule(&a);
        let sub = SubCluster {
            gateway: NodeId(2),
            head_prime: NodeId(5),
            members: vec![NodeId(6)],
            parent_head: NodeId(0),
            reserved_slots: 1,
        };
        let mut ledger = EnergyLedger::new(7);
        extend_tdma(&mut net, &mut s, &[sub], &RadioParams::default(), &mut ledger).unwrap();
        assert_eq!(s.frame_length(NodeId(0)), 4);
        assert_eq!(
            s.frames[&NodeId(0)],
            vec![
                Slot::data(NodeId(1)),
                Slot::relay(NodeId(2)),
                Slot::data(NodeId(2)),
                Slot::data(NodeId(3)),
            ]
        );
        assert_eq!(s.head_slots_of(NodeId(2)), 2);
        assert_eq!(s.sub_frame_length(NodeId(5)), 1);
        assert_eq!(s.sub_frames[&NodeId(5)], vec![NodeId(6)]);
    }

    /// head H=(50,0) 50 m from the sink, member M 50 m from H, gateway G
    /// 50 m from H, CH' 30 m from G, orphan O 20 m from CH'.
    fn chain() -> Network {
        layout(&[
            (50.0, 0.0),   // 0 H
            (100.0, 0.0),  // 1 M
            (50.0, 50.0),  // 2 G
            (50.0, 80.0),  // 3 CH'
            (50.0, 100.0), // 4 O
        ])
    }

    #[test]
    fn recovery_on_chain() {
        let mut net = chain();
        let radio = RadioParams::default();
        let (a, mut ledger) = setup(&mut net, &[0]);
        let mut s = build_tdma_schedule(&a);
        let rec = recover_orphans(&mut net, &a, &mut s, &radio, &mut ledger).unwrap();
        assert_eq!(
            rec.report,
            OrphanReport {
                total_orphans: 2,
                recovered: 2,
                unreachable: 0,
                gateways: 1
            }
        );
        assert_eq!(rec.subs[0].gateway, NodeId(2));
        assert_eq!(rec.subs[0].head_prime, NodeId(3));
        assert_eq!(rec.subs[0].members, vec![NodeId(4)]);
        assert_eq!(net.node(NodeId(3)).role, Role::SubClusterHead);
    }

    #[test]
    fn chain_energy_matches_hand_sum() {
        let mut net = chain();
        let radio = RadioParams::default();
        let (a, mut ledger) = setup(&mut net, &[0]);
        let mut s = build_tdma_schedule(&a);
        let rec = recover_orphans(&mut net, &a, &mut s, &radio, &mut ledger).unwrap();
        let mut steady = EnergyLedger::new(5);
        let report =
            run_steady_state_oleach(&mut net, &a, &s, &rec.subs, &radio, &mut steady).unwrap();

        // every hop is below the 87.7 m crossover
        let l = 2000.0;
        let tx = |d: f64| l * 50e-12 + l * 10e-12 * d * d;
        let rx = l * 50e-12;
        let agg = |k: f64| k * l * 5e-12;
        let orphan = tx(20.0);
        let head_prime = rx + agg(2.0) + tx(30.0);
        let gateway = rx + tx(50.0) + tx(50.0);
        let member = tx(50.0);
        let head = 3.0 * rx + agg(4.0) + tx(50.0);
        let expected = orphan + head_prime + gateway + member + head;
        assert!((steady.total() - expected).abs() <= 1e-12 * expected);
        assert!((steady.debit_of(NodeId(0)) - head).abs() <= 1e-12 * head);
        assert!((steady.debit_of(NodeId(2)) - gateway).abs() <= 1e-12 * gateway);
        assert_eq!(report.packets_to_bs, 1);
        assert_eq!(report.delivered, ids(&[0, 1, 2, 3, 4]));
    }

    #[test]
    fn no_subs_matches_leach() {
        let mut a_net = layout(&[(0.0, 0.0), (30.0, 40.0), (20.0, 0.0), (200.0, 200.0)]);
        let (a, _) = setup(&mut a_net, &[0]);
        let mut b_net = a_net.clone();
        let s = build_tdma_schedule(&a);
        let radio = RadioParams::default();
        let mut la = EnergyLedger::new(4);
        let mut lb = EnergyLedger::new(4);
        let ra = run_steady_state_leach(&mut a_net, &a, &s, &radio, &mut la).unwrap();
        let rb = run_steady_state_oleach(&mut b_net, &a, &s, &[], &radio, &mut lb).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(la, lb);
        assert_eq!(a_net.nodes, b_net.nodes);
    }

    #[test]
    fn oleach_delivers_superset() {
        let mut net = chain();
        let radio = RadioParams::default();
        let (a, mut ledger) = setup(&mut net, &[0]);
        let mut leach_net = net.clone();
        let base = build_tdma_schedule(&a);
        let mut s = base.clone();
        let rec = recover_orphans(&mut net, &a, &mut s, &radio, &mut ledger).unwrap();
        let o = run_steady_state_oleach(&mut net, &a, &s, &rec.subs, &radio, &mut ledger).unwrap();
        let l = run_steady_state_leach(&mut leach_net, &a, &base, &radio, &mut EnergyLedger::new(5))
            .unwrap();
        assert!(o.delivered.is_superset(&l.delivered));
        assert!(o.sources_delivered() > l.sources_delivered());
    }
}
