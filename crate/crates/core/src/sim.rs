//! The round loop and LEACH/O-LEACH comparison runs.
//!
//! Each round: elect heads, form clusters, build the TDMA frames, (O-LEACH
//! only) recover orphans and reserve their slots, broadcast the schedules, run
//! the steady state, record metrics.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::error::{Result, SimError};
use crate::leach::{
    broadcast_schedules, build_tdma_schedule, elect_cluster_heads, form_clusters,
    run_steady_state_leach, ClusterAssignment, Round, RoundReport, TdmaSchedule,
};
use crate::metrics::{
    compute_round_metrics, RoundMetrics, RunEcho, SimulationTrace, Termination, TraceBuilder,
};
use crate::net::{deploy_network, EnergyLedger, Network, NetworkConfig, NodeId, Protocol};
use crate::oleach::{detect_orphans, recover_orphans, run_steady_state_oleach, OrphanReport, Recovery};
use crate::radio::RadioParams;

/// Everything needed to run and emit a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub network: NetworkConfig,
    pub radio: RadioParams,
    /// Run LEACH and O-LEACH side by side from the same seed.
    pub compare: bool,
    pub output_dir: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            radio: RadioParams::default(),
            compare: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> std::result::Result<(), crate::ConfigError> {
        self.network.validate()?;
        self.radio.validate()
    }

    pub fn protocols(&self) -> Vec<Protocol> {
        if self.compare {
            vec![Protocol::Leach, Protocol::OLeach]
        } else {
            vec![self.network.protocol]
        }
    }
}

/// Detailed view of one simulated round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub metrics: RoundMetrics,
    /// Nodes alive when the round started.
    pub participants: BTreeSet<NodeId>,
    pub assignment: ClusterAssignment,
    /// Final schedule, including any relay slots and sub-frames.
    pub schedule: TdmaSchedule,
    pub recovery: Recovery,
    pub report: RoundReport,
    pub ledger: EnergyLedger,
}

impl RoundOutcome {
    pub fn heads(&self) -> &BTreeSet<NodeId> {
        &self.assignment.heads
    }

    pub fn deaths(&self) -> &[NodeId] {
        self.ledger.deaths()
    }
}

pub struct Simulation {
    net: Network,
    radio: RadioParams,
    protocol: Protocol,
    round: Round,
    builder: TraceBuilder,
    done: Option<Termination>,
}

impl Simulation {
    pub fn new(config: NetworkConfig, radio: RadioParams) -> Result<Self> {
        radio.validate()?;
        let net = deploy_network(config)?;
        Ok(Self::from_network(net, radio))
    }

    /// Starts from an already deployed network.
    pub fn from_network(net: Network, radio: RadioParams) -> Self {
        let protocol = net.config.protocol;
        let builder = TraceBuilder::new(RunEcho {
            network: net.config.clone(),
            radio,
            protocol,
        });
        Self {
            net,
            radio,
            protocol,
            round: Round(0),
            builder,
            done: None,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn termination(&self) -> Option<Termination> {
        self.done
    }

    /// Runs one round; `None` once the run has terminated.
    pub fn step(&mut self) -> Result<Option<RoundOutcome>> {
        if self.done.is_some() {
            return Ok(None);
        }
        if self.round.0 >= self.net.config.max_rounds {
            self.done = Some(Termination::MaxRounds);
            return Ok(None);
        }
        if self.net.alive_count() == 0 {
            self.done = Some(Termination::AllDead);
            return Ok(None);
        }

        let round = self.round;
        let radio = self.radio;
        let net = &mut self.net;
        let participants: BTreeSet<NodeId> = net.alive_ids().collect();
        let mut ledger = EnergyLedger::new(net.len());

        let heads = elect_cluster_heads(net, round);
        let assignment = form_clusters(net, &heads, &radio, &mut ledger)?;
        let mut schedule = build_tdma_schedule(&assignment);
        let recovery = match self.protocol {
            Protocol::Leach => {
                let orphans = detect_orphans(net, &assignment);
                Recovery {
                    report: OrphanReport::unrecovered(orphans.len()),
                    unreachable: orphans,
                    subs: Vec::new(),
                }
            }
            Protocol::OLeach => recover_orphans(net, &assignment, &mut schedule, &radio, &mut ledger)?,
        };
        broadcast_schedules(net, &schedule, &radio, &mut ledger)?;
        let report = match self.protocol {
            Protocol::Leach => run_steady_state_leach(net, &assignment, &schedule, &radio, &mut ledger)?,
            Protocol::OLeach => run_steady_state_oleach(
                net,
                &assignment,
                &schedule,
                &recovery.subs,
                &radio,
                &mut ledger,
            )?,
        };

        let metrics = compute_round_metrics(
            round,
            participants.len(),
            net,
            &assignment,
            &recovery.report,
            &report,
            &ledger,
        );
        self.builder.push(metrics.clone())?;
        self.round = round.next();
        Ok(Some(RoundOutcome {
            metrics,
            participants,
            assignment,
            schedule,
            recovery,
            report,
            ledger,
        }))
    }

    /// Runs to termination.
    pub fn run(mut self) -> Result<SimulationTrace> {
        while self.step()?.is_some() {}
        Ok(self.into_trace())
    }

    pub fn into_trace(self) -> SimulationTrace {
        let termination = self.done.unwrap_or(Termination::MaxRounds);
        self.builder.finish(termination)
    }
}

pub fn run_protocol(config: NetworkConfig, radio: RadioParams) -> Result<SimulationTrace> {
    Simulation::new(config, radio)?.run()
}

/// Two traces from the same deployment and election stream.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub leach: SimulationTrace,
    pub oleach: SimulationTrace,
    /// First round whose death sequence differs between the protocols. Rounds
    /// before it saw identical alive sets and identical head elections.
    pub divergence_round: Option<u32>,
}

impl Comparison {
    /// Number of leading rounds in which both runs are directly comparable.
    pub fn comparable_rounds(&self) -> usize {
        let both = self.leach.rounds.len().min(self.oleach.rounds.len());
        self.divergence_round.map_or(both, |r| both.min(r as usize))
    }
}

/// Runs both protocols in lockstep.
///
/// Until the death sequences diverge, both runs consume the generator
/// identically, so their head sets must match round for round; a mismatch is
/// reported as an invariant violation.
pub fn run_comparison(config: &NetworkConfig, radio: RadioParams) -> Result<Comparison> {
    let mut leach = Simulation::new(
        NetworkConfig {
            protocol: Protocol::Leach,
            ..config.clone()
        },
        radio,
    )?;
    let mut oleach = Simulation::new(
        NetworkConfig {
            protocol: Protocol::OLeach,
            ..config.clone()
        },
        radio,
    )?;
    let mut divergence_round = None;
    loop {
        let a = leach.step()?;
        let b = oleach.step()?;
        match (&a, &b) {
            (None, None) => break,
            (Some(a), Some(b)) if divergence_round.is_none() => {
                if a.heads() != b.heads() {
                    return Err(SimError::Invariant(format!(
                        "round {}: head sets differ before death divergence",
                        a.metrics.round
                    )));
                }
                if a.deaths() != b.deaths() {
                    divergence_round = Some(a.metrics.round);
                }
            }
            (Some(r), None) | (None, Some(r)) if divergence_round.is_none() => {
                divergence_round = Some(r.metrics.round);
            }
            _ => {}
        }
    }
    Ok(Comparison {
        leach: leach.into_trace(),
        oleach: oleach.into_trace(),
        divergence_round,
    })
}

/// One trace per requested protocol, LEACH first in comparison mode.
pub fn run_simulation(spec: &RunSpec) -> Result<Vec<SimulationTrace>> {
    spec.validate()?;
    if spec.compare {
        let c = run_comparison(&spec.network, spec.radio)?;
        Ok(vec![c.leach, c.oleach])
    } else {
        Ok(vec![run_protocol(spec.network.clone(), spec.radio)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rounds_gives_empty_trace() {
        let spec = RunSpec {
            network: NetworkConfig {
                max_rounds: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let traces = run_simulation(&spec).unwrap();
        assert_eq!(traces.len(), 1);
        assert!(traces[0].rounds.is_empty());
        assert_eq!(traces[0].termination, Termination::MaxRounds);
    }

    #[test]
    fn empty_network_terminates_all_dead() {
        let t = run_protocol(
            NetworkConfig {
                n_nodes: 0,
                ..Default::default()
            },
            RadioParams::default(),
        )
        .unwrap();
        assert!(t.rounds.is_empty());
        assert_eq!(t.termination, Termination::AllDead);
    }

    #[test]
    fn bad_radio_rejected_before_running() {
        let err = Simulation::new(
            NetworkConfig::default(),
            RadioParams {
                eps_amp: -1.0,
                ..Default::default()
            },
        )
        .err()
        .unwrap();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn runs_until_everyone_dies() {
        let t = run_protocol(
            NetworkConfig {
                n_nodes: 30,
                initial_energy: 0.002,
                max_rounds: 100_000,
                protocol: Protocol::OLeach,
                ..Default::default()
            },
            RadioParams::default(),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::AllDead);
        assert!(t.lifetime.last_node_death.is_some());
        let lt = t.lifetime;
        assert!(lt.first_node_death <= lt.half_nodes_dead);
        assert!(lt.half_nodes_dead <= lt.last_node_death);
        assert_eq!(lt.last_node_death, Some(t.rounds.len() as u32));
    }

    #[test]
    fn round_level_conservation() {
        let config = NetworkConfig {
            n_nodes: 120,
            max_rounds: 60,
            protocol: Protocol::OLeach,
            ..Default::default()
        };
        let mut sim = Simulation::new(config, RadioParams::default()).unwrap();
        let mut before = sim.network().total_energy();
        while let Some(out) = sim.step().unwrap() {
            let after = sim.network().total_energy();
            assert!((before - (after + out.ledger.total())).abs() <= 1e-12 * before);
            assert_eq!(out.metrics.energy_remaining, after);
            before = after;
        }
    }

    #[test]
    fn comparison_keeps_heads_aligned() {
        let c = run_comparison(
            &NetworkConfig {
                n_nodes: 200,
                max_rounds: 300,
                ..Default::default()
            },
            RadioParams::default(),
        )
        .unwrap();
        assert!(c.comparable_rounds() > 0);
        for (l, o) in c.leach.rounds.iter().zip(&c.oleach.rounds).take(c.comparable_rounds()) {
            assert_eq!(l.heads, o.heads);
            assert_eq!(l.alive, o.alive);
            assert!(o.sources_delivered >= l.sources_delivered);
        }
    }
}
