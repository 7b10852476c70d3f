//! Baseline LEACH round: threshold election, nearest-head clustering, TDMA
//! scheduling and the steady-state data flow.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::error::Result;
use crate::net::{EnergyLedger, Network, NodeId, Role};
use crate::radio::{aggregation_cost, rx_cost, tx_cost, RadioParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Round(pub u32);

impl Round {
    pub fn index(self) -> u32 {
        self.0
    }

    pub fn epoch_position(self, p: f64) -> u32 {
        self.0 % epoch_length(p)
    }

    pub fn next(self) -> Round {
        Round(self.0 + 1)
    }
}

/// Number of rounds in which every node is expected to head once: `round(1/P)`.
pub fn epoch_length(p: f64) -> u32 {
    ((1.0 / p).round() as u32).max(1)
}

/// Election threshold `P / (1 − P·(r mod round(1/P)))` for candidates, 0 otherwise.
pub fn threshold(p: f64, r: u32, in_candidates: bool) -> f64 {
    if !in_candidates {
        return 0.0;
    }
    let pos = f64::from(r % epoch_length(p));
    (p / (1.0 - p * pos)).clamp(0.0, 1.0)
}

/// Whether `id` is still a head candidate (has not headed within the current epoch window).
pub fn in_candidate_set(net: &Network, id: NodeId, round: Round) -> bool {
    let node = net.node(id);
    node.alive
        && match node.rounds_since_head(round.0) {
            None => true,
            Some(since) => since >= epoch_length(net.config.ch_probability),
        }
}

/// Elects this round's cluster heads.
///
/// Every alive node, in ascending id, draws one uniform number from the
/// network generator whether or not it can be elected, so the stream position
/// only depends on the alive set. A node becomes head when its draw is below
/// its threshold and fewer than `ceil(TR · alive)` heads have been elected so
/// far. When no alive node is left in the candidate set, the set is reset.
pub fn elect_cluster_heads(net: &mut Network, round: Round) -> BTreeSet<NodeId> {
    let alive: Vec<NodeId> = net.alive_ids().collect();
    for &id in &alive {
        net.set_role(id, Role::Member);
    }
    if !alive.is_empty() && !alive.iter().any(|&id| in_candidate_set(net, id, round)) {
        for &id in &alive {
            net.node_mut(id).last_head_round = None;
        }
    }

    let p = net.config.ch_probability;
    let cap = (net.config.clustering_rate_cap * alive.len() as f64).ceil() as usize;
    let mut heads = BTreeSet::new();
    for id in alive {
        let x: f64 = net.rng_mut().random();
        let t = threshold(p, round.0, in_candidate_set(net, id, round));
        if x < t && heads.len() < cap {
            heads.insert(id);
            net.node_mut(id).last_head_round = Some(round.0);
            net.set_role(id, Role::ClusterHead);
        }
    }
    heads
}

/// Result of the set-up phase: who leads, who follows, who is left out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterAssignment {
    pub heads: BTreeSet<NodeId>,
    /// member → head
    pub membership: BTreeMap<NodeId, NodeId>,
    /// Nodes with no live head in range: the orphans before any recovery.
    pub unassigned: BTreeSet<NodeId>,
}

impl ClusterAssignment {
    /// Members of `head` in ascending id.
    pub fn members_of(&self, head: NodeId) -> Vec<NodeId> {
        self.membership
            .iter()
            .filter(|(_, &h)| h == head)
            .map(|(&m, _)| m)
            .collect()
    }

    pub fn head_of(&self, member: NodeId) -> Option<NodeId> {
        self.membership.get(&member).copied()
    }
}

/// Forms clusters around `heads`.
///
/// Each head first broadcasts its advertisement at `tx_range`. Then every
/// other alive node, in ascending id, joins the nearest head that survived
/// its advertisement and lies within `tx_range` (ties go to the lower head
/// id) and pays for a join message to it; the head pays to receive it.
pub fn form_clusters(
    net: &mut Network,
    heads: &BTreeSet<NodeId>,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<ClusterAssignment> {
    let range = net.config.tx_range;
    let ctrl = net.config.control_bits;

    let participants: Vec<NodeId> = net.alive_ids().collect();
    for &h in heads {
        net.spend(h, tx_cost(ctrl, range, radio), ledger)?;
    }
    let live_heads: Vec<NodeId> = heads.iter().copied().filter(|&h| net.is_alive(h)).collect();

    let mut assignment = ClusterAssignment {
        heads: heads.clone(),
        ..Default::default()
    };
    for id in participants {
        if heads.contains(&id) {
            continue;
        }
        match nearest_within(net, id, &live_heads, range) {
            Some((head, _)) => {
                assignment.membership.insert(id, head);
                net.set_role(id, Role::Member);
                unicast(net, id, head, ctrl, radio, ledger)?;
            }
            None => {
                assignment.unassigned.insert(id);
                net.set_role(id, Role::Orphan);
            }
        }
    }
    Ok(assignment)
}

/// Point-to-point message: the sender pays to transmit over the actual
/// distance, the receiver pays to receive if still alive. Returns whether
/// the message was received.
pub(crate) fn unicast(
    net: &mut Network,
    from: NodeId,
    to: NodeId,
    bits: u64,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<bool> {
    let d = net.distance(from, to);
    let sent = net.spend(from, tx_cost(bits, d, radio), ledger)?;
    Ok(sent && net.spend(to, rx_cost(bits, radio), ledger)?)
}

/// Closest candidate within `range` of `from`; `candidates` must be sorted so
/// that strict improvement keeps the lowest id on ties.
pub(crate) fn nearest_within(
    net: &Network,
    from: NodeId,
    candidates: &[NodeId],
    range: f64,
) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for &c in candidates {
        let d = net.distance(from, c);
        if d <= range && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// The node's own sensed reading.
    Data,
    /// A sub-cluster aggregate relayed by a gateway.
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub node: NodeId,
    pub kind: SlotKind,
}

impl Slot {
    pub fn data(node: NodeId) -> Self {
        Self {
            node,
            kind: SlotKind::Data,
        }
    }

    pub fn relay(node: NodeId) -> Self {
        Self {
            node,
            kind: SlotKind::Relay,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TdmaSchedule {
    /// head → slots in transmission order; the slot index is the position.
    pub frames: BTreeMap<NodeId, Vec<Slot>>,
    /// sub-cluster head → orphan members in transmission order.
    pub sub_frames: BTreeMap<NodeId, Vec<NodeId>>,
}

impl TdmaSchedule {
    pub fn frame_length(&self, head: NodeId) -> usize {
        self.frames.get(&head).map_or(0, Vec::len)
    }

    pub fn sub_frame_length(&self, head_prime: NodeId) -> usize {
        self.sub_frames.get(&head_prime).map_or(0, Vec::len)
    }

    /// Slots granted to `node` across every head frame.
    pub fn head_slots_of(&self, node: NodeId) -> usize {
        self.frames
            .values()
            .flatten()
            .filter(|s| s.node == node)
            .count()
    }
}

/// One data slot per member, members ordered by ascending id.
pub fn build_tdma_schedule(assignment: &ClusterAssignment) -> TdmaSchedule {
    let mut frames: BTreeMap<NodeId, Vec<Slot>> =
        assignment.heads.iter().map(|&h| (h, Vec::new())).collect();
    // membership iterates in ascending member id
    for (&member, &head) in &assignment.membership {
        frames.entry(head).or_default().push(Slot::data(member));
    }
    TdmaSchedule {
        frames,
        sub_frames: BTreeMap::new(),
    }
}

/// Each live head with a non-empty frame broadcasts its schedule at
/// `tx_range`; every live node holding a slot pays to receive it.
pub fn broadcast_schedules(
    net: &mut Network,
    schedule: &TdmaSchedule,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<()> {
    let range = net.config.tx_range;
    let ctrl = net.config.control_bits;
    for (&head, slots) in &schedule.frames {
        if slots.is_empty() || !net.spend(head, tx_cost(ctrl, range, radio), ledger)? {
            continue;
        }
        let listeners: BTreeSet<NodeId> = slots.iter().map(|s| s.node).collect();
        for node in listeners {
            net.spend(node, rx_cost(ctrl, radio), ledger)?;
        }
    }
    Ok(())
}

/// Outcome of one steady-state phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundReport {
    /// Aggregated packets that reached the sink, one per transmitting head.
    pub packets_to_bs: usize,
    /// Distinct nodes whose reading is contained in a packet that reached the sink.
    pub delivered: BTreeSet<NodeId>,
}

impl RoundReport {
    pub fn sources_delivered(&self) -> usize {
        self.delivered.len()
    }
}

/// Sub-cluster aggregate held by a gateway, waiting for its relay slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct HeldRelay {
    pub sources: Vec<NodeId>,
}

/// Runs every head frame in ascending head id and forwards each aggregate to
/// the sink. `relays` holds the sub-cluster packets gateways are carrying.
pub(crate) fn collect_and_forward(
    net: &mut Network,
    schedule: &TdmaSchedule,
    relays: &BTreeMap<NodeId, HeldRelay>,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
    report: &mut RoundReport,
) -> Result<()> {
    let l = net.config.packet_bits;
    for (&head, slots) in &schedule.frames {
        if !net.is_alive(head) {
            continue;
        }
        let mut signals = 0usize;
        let mut sources = vec![head];
        for slot in slots {
            if !net.is_alive(head) {
                break;
            }
            let carried: Vec<NodeId> = match slot.kind {
                SlotKind::Data => vec![slot.node],
                SlotKind::Relay => match relays.get(&slot.node) {
                    Some(relay) => relay.sources.clone(),
                    None => continue,
                },
            };
            if unicast(net, slot.node, head, l, radio, ledger)? {
                signals += 1;
                sources.extend(carried);
            }
        }
        if !net.spend(head, aggregation_cost(l, signals + 1, radio), ledger)? {
            continue;
        }
        let d_sink = net.distance_to_sink(head);
        if net.spend(head, tx_cost(l, d_sink, radio), ledger)? {
            report.packets_to_bs += 1;
            report.delivered.extend(sources);
        }
    }
    Ok(())
}

/// Steady state without sub-clusters. Orphans transmit nothing; their data is lost.
pub fn run_steady_state_leach(
    net: &mut Network,
    assignment: &ClusterAssignment,
    schedule: &TdmaSchedule,
    radio: &RadioParams,
    ledger: &mut EnergyLedger,
) -> Result<RoundReport> {
    debug_assert!(schedule.frames.keys().all(|h| assignment.heads.contains(h)));
    let mut report = RoundReport::default();
    collect_and_forward(net, schedule, &BTreeMap::new(), radio, ledger, &mut report)?;
    Ok(report)
}
