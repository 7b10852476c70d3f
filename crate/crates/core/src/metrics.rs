//! Per-round metrics and whole-run traces.

use crate::error::{Result, SimError};
use crate::leach::{ClusterAssignment, Round, RoundReport};
use crate::net::{EnergyLedger, Network, NetworkConfig, Protocol};
use crate::oleach::OrphanReport;
use crate::radio::RadioParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    /// Nodes alive when the round started.
    pub alive: usize,
    pub heads: usize,
    pub orphans_total: usize,
    pub orphans_recovered: usize,
    pub gateways: usize,
    pub connectivity_rate: f64,
    pub coverage_rate: f64,
    pub energy_dissipated: f64,
    /// Residual energy of the whole network at the end of the round.
    pub energy_remaining: f64,
    pub packets_to_bs: usize,
    pub sources_delivered: usize,
}

impl RoundMetrics {
    /// Column names in declaration order.
    pub const FIELDS: [&'static str; 12] = [
        "round",
        "alive",
        "heads",
        "orphans_total",
        "orphans_recovered",
        "gateways",
        "connectivity_rate",
        "coverage_rate",
        "energy_dissipated",
        "energy_remaining",
        "packets_to_bs",
        "sources_delivered",
    ];
}

/// Builds the metrics of a finished round.
///
/// `alive` is the number of nodes that entered the round; both rates use it as
/// denominator and are 0 when it is 0.
pub fn compute_round_metrics(
    round: Round,
    alive: usize,
    net: &Network,
    assignment: &ClusterAssignment,
    orphans: &OrphanReport,
    report: &RoundReport,
    ledger: &EnergyLedger,
) -> RoundMetrics {
    let connected = assignment.heads.len() + assignment.membership.len() + orphans.recovered;
    let rate = |n: usize| if alive == 0 { 0.0 } else { n as f64 / alive as f64 };
    RoundMetrics {
        round: round.0,
        alive,
        heads: assignment.heads.len(),
        orphans_total: orphans.total_orphans,
        orphans_recovered: orphans.recovered,
        gateways: orphans.gateways,
        connectivity_rate: rate(connected),
        coverage_rate: rate(report.sources_delivered()),
        energy_dissipated: ledger.total(),
        energy_remaining: net.total_energy(),
        packets_to_bs: report.packets_to_bs,
        sources_delivered: report.sources_delivered(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxRounds,
    AllDead,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::MaxRounds => "max_rounds",
            Termination::AllDead => "all_dead",
        }
    }
}

/// Liveness milestones, expressed as the number of completed rounds after
/// which the milestone was first observed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Lifetime {
    pub first_node_death: Option<u32>,
    pub half_nodes_dead: Option<u32>,
    pub last_node_death: Option<u32>,
}

/// Configuration a trace was produced from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEcho {
    pub network: NetworkConfig,
    pub radio: RadioParams,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub config: RunEcho,
    pub rounds: Vec<RoundMetrics>,
    pub termination: Termination,
    pub lifetime: Lifetime,
}

impl SimulationTrace {
    pub fn protocol(&self) -> Protocol {
        self.config.protocol
    }

    pub fn total<F: Fn(&RoundMetrics) -> usize>(&self, f: F) -> usize {
        self.rounds.iter().map(f).sum()
    }

    pub fn mean<F: Fn(&RoundMetrics) -> f64>(&self, f: F) -> f64 {
        if self.rounds.is_empty() {
            0.0
        } else {
            self.rounds.iter().map(f).sum::<f64>() / self.rounds.len() as f64
        }
    }
}

/// Appends round metrics in order, enforcing trace invariants.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    config: RunEcho,
    rounds: Vec<RoundMetrics>,
    lifetime: Lifetime,
}

impl TraceBuilder {
    pub fn new(config: RunEcho) -> Self {
        Self {
            config,
            rounds: Vec::new(),
            lifetime: Lifetime::default(),
        }
    }

    pub fn rounds(&self) -> &[RoundMetrics] {
        &self.rounds
    }

    pub fn push(&mut self, m: RoundMetrics) -> Result<()> {
        let expected = self.rounds.len() as u32;
        if m.round != expected {
            return Err(SimError::OutOfOrderRound {
                expected,
                got: m.round,
            });
        }
        if let Some(prev) = self.rounds.last() {
            if m.alive > prev.alive {
                return Err(SimError::NonMonotone {
                    round: m.round,
                    what: "alive",
                    previous: prev.alive as f64,
                    current: m.alive as f64,
                });
            }
            if m.energy_remaining > prev.energy_remaining {
                return Err(SimError::NonMonotone {
                    round: m.round,
                    what: "energy_remaining",
                    previous: prev.energy_remaining,
                    current: m.energy_remaining,
                });
            }
        }
        self.observe_alive(m.round, m.alive);
        self.rounds.push(m);
        Ok(())
    }

    fn observe_alive(&mut self, at: u32, alive: usize) {
        let n = self.config.network.n_nodes;
        let lt = &mut self.lifetime;
        if alive < n && lt.first_node_death.is_none() {
            lt.first_node_death = Some(at);
        }
        if alive * 2 <= n && lt.half_nodes_dead.is_none() {
            lt.half_nodes_dead = Some(at);
        }
        if alive == 0 && lt.last_node_death.is_none() {
            lt.last_node_death = Some(at);
        }
    }

    pub fn finish(mut self, termination: Termination) -> SimulationTrace {
        if termination == Termination::AllDead {
            // every node died during the last recorded round
            let done = self.rounds.len() as u32;
            self.observe_alive(done, 0);
        }
        SimulationTrace {
            config: self.config,
            rounds: self.rounds,
            termination,
            lifetime: self.lifetime,
        }
    }
}

/// Collects a stream of round metrics into a trace.
pub fn accumulate_trace<I>(config: RunEcho, metrics: I, termination: Termination) -> Result<SimulationTrace>
where
    I: IntoIterator<Item = RoundMetrics>,
{
    let mut builder = TraceBuilder::new(config);
    for m in metrics {
        builder.push(m)?;
    }
    Ok(builder.finish(termination))
}
