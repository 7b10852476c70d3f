//! The sensor field: node identity, placement, energy bookkeeping and geometry.
//!
//! All randomness of a run comes from the single generator owned by
//! [`Network`]. Deployment draws `x` then `y` for each node in ascending id;
//! afterwards the generator is only touched by cluster-head elections.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(self, other: Position) -> f64 {
        distance(self, other)
    }
}

/// Euclidean distance.
///
/// Written as `sqrt(dx² + dy²)` rather than `hypot` so the result only depends
/// on IEEE-754 basic operations and is identical on every platform.
pub fn distance(a: Position, b: Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Member,
    ClusterHead,
    Gateway,
    SubClusterHead,
    Orphan,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub pos: Position,
    pub energy: f64,
    pub alive: bool,
    /// Round in which the node last served as cluster head; `None` means it
    /// has not served since the last reset of the candidate set.
    pub last_head_round: Option<u32>,
    pub role: Role,
}

impl Node {
    pub fn new(id: NodeId, pos: Position, energy: f64) -> Self {
        Self {
            id,
            pos,
            energy,
            alive: energy > 0.0,
            last_head_round: None,
            role: if energy > 0.0 { Role::Member } else { Role::Dead },
        }
    }

    /// Rounds elapsed since this node last headed a cluster, `None` for never.
    pub fn rounds_since_head(&self, round: u32) -> Option<u32> {
        self.last_head_round.map(|r| round.saturating_sub(r))
    }

    /// Removes `cost` joules, clamping at zero. Reaching zero kills the node.
    ///
    /// Returns the energy charged: `cost`, or the whole residual when clamped.
    pub fn debit_energy(&mut self, cost: f64) -> Result<f64> {
        if !self.alive {
            return Err(SimError::DeadNode(self.id));
        }
        if !cost.is_finite() || cost < 0.0 {
            return Err(SimError::InvalidCost { node: self.id, cost });
        }
        let after = self.energy - cost;
        if after <= 0.0 {
            let residual = self.energy;
            self.energy = 0.0;
            self.alive = false;
            self.role = Role::Dead;
            Ok(residual)
        } else {
            self.energy = after;
            Ok(cost)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Leach,
    OLeach,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Leach => "leach",
            Protocol::OLeach => "oleach",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "leach" => Ok(Protocol::Leach),
            "oleach" => Ok(Protocol::OLeach),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n_nodes: usize,
    pub field_width: f64,
    pub field_height: f64,
    pub sink: Position,
    pub initial_energy: f64,
    /// Desired fraction of cluster heads per round.
    pub ch_probability: f64,
    /// Upper bound on heads per round as a fraction of alive nodes.
    pub clustering_rate_cap: f64,
    pub tx_range: f64,
    pub packet_bits: u64,
    pub control_bits: u64,
    pub max_rounds: u32,
    pub seed: u64,
    pub protocol: Protocol,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_nodes: 500,
            field_width: 300.0,
            field_height: 300.0,
            sink: Position::new(0.0, 0.0),
            initial_energy: 0.5,
            ch_probability: 0.1,
            clustering_rate_cap: 0.1,
            tx_range: 70.0,
            packet_bits: 2000,
            control_bits: 200,
            max_rounds: 2000,
            seed: 1,
            protocol: Protocol::Leach,
        }
    }
}

fn finite(field: &'static str, v: f64) -> std::result::Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::range(field, format!("must be finite, got {v}")))
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        finite("field_width", self.field_width)?;
        finite("field_height", self.field_height)?;
        finite("sink_x", self.sink.x)?;
        finite("sink_y", self.sink.y)?;
        finite("initial_energy", self.initial_energy)?;
        finite("ch_probability", self.ch_probability)?;
        finite("clustering_rate_cap", self.clustering_rate_cap)?;
        finite("tx_range", self.tx_range)?;
        if self.field_width < 0.0 {
            return Err(ConfigError::range("field_width", "must be >= 0"));
        }
        if self.field_height < 0.0 {
            return Err(ConfigError::range("field_height", "must be >= 0"));
        }
        if self.initial_energy <= 0.0 {
            return Err(ConfigError::range("initial_energy", "must be > 0"));
        }
        if !(self.ch_probability > 0.0 && self.ch_probability < 1.0) {
            return Err(ConfigError::range(
                "ch_probability",
                format!("must lie in (0, 1), got {}", self.ch_probability),
            ));
        }
        if !(self.clustering_rate_cap > 0.0 && self.clustering_rate_cap <= 1.0) {
            return Err(ConfigError::range(
                "clustering_rate_cap",
                format!("must lie in (0, 1], got {}", self.clustering_rate_cap),
            ));
        }
        if self.tx_range <= 0.0 {
            return Err(ConfigError::range("tx_range", "must be > 0"));
        }
        if self.packet_bits == 0 {
            return Err(ConfigError::range("packet_bits", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-round record of every joule removed from every node, plus the order in
/// which nodes died.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    debits: Vec<f64>,
    deaths: Vec<NodeId>,
}

impl EnergyLedger {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            debits: vec![0.0; n_nodes],
            deaths: Vec::new(),
        }
    }

    pub fn debit_of(&self, id: NodeId) -> f64 {
        self.debits.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn debits(&self) -> &[f64] {
        &self.debits
    }

    pub fn deaths(&self) -> &[NodeId] {
        &self.deaths
    }

    /// Sum of all debits, accumulated in node-id order.
    pub fn total(&self) -> f64 {
        self.debits.iter().sum()
    }

    fn record(&mut self, id: NodeId, amount: f64, died: bool) {
        if self.debits.len() <= id.index() {
            self.debits.resize(id.index() + 1, 0.0);
        }
        self.debits[id.index()] += amount;
        if died {
            self.deaths.push(id);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub config: NetworkConfig,
    rng: ChaCha8Rng,
}

/// Places `n_nodes` uniformly at random in the field, all at full energy.
pub fn deploy_network(config: NetworkConfig) -> std::result::Result<Network, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nodes = (0..config.n_nodes)
        .map(|i| {
            let x = rng.random::<f64>() * config.field_width;
            let y = rng.random::<f64>() * config.field_height;
            Node::new(NodeId(i), Position::new(x, y), config.initial_energy)
        })
        .collect();
    Ok(Network { nodes, config, rng })
}

impl Network {
    /// Builds a network from explicit nodes, e.g. a hand-made layout.
    ///
    /// Node ids must be dense `0..nodes.len()` in order. The generator is
    /// seeded from `config.seed` exactly as [`deploy_network`] would leave it
    /// only if no draws were made; it is meant for constructed scenarios.
    pub fn from_nodes(
        config: NetworkConfig,
        nodes: Vec<Node>,
    ) -> std::result::Result<Self, ConfigError> {
        config.validate()?;
        for (i, n) in nodes.iter().enumerate() {
            if n.id != NodeId(i) {
                return Err(ConfigError::range(
                    "n_nodes",
                    format!("node ids must be dense, found {} at index {i}", n.id),
                ));
            }
        }
        let config = NetworkConfig {
            n_nodes: nodes.len(),
            ..config
        };
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { nodes, config, rng })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn pos(&self, id: NodeId) -> Position {
        self.nodes[id.index()].pos
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.nodes[id.index()].alive
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        distance(self.pos(a), self.pos(b))
    }

    pub fn distance_to_sink(&self, id: NodeId) -> f64 {
        distance(self.pos(id), self.config.sink)
    }

    pub fn alive_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.alive).map(|n| n.id)
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    /// Residual energy summed in node-id order.
    pub fn total_energy(&self) -> f64 {
        self.nodes.iter().map(|n| n.energy).sum()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Sets the role of a live node. Dead nodes keep `Role::Dead`.
    pub fn set_role(&mut self, id: NodeId, role: Role) {
        let node = &mut self.nodes[id.index()];
        if node.alive {
            node.role = role;
        }
    }

    /// Charges `cost` to `id` if it is still alive and records the debit.
    ///
    /// Returns whether the node performed the action. A node whose energy
    /// runs out on this debit still completes the action.
    pub fn spend(&mut self, id: NodeId, cost: f64, ledger: &mut EnergyLedger) -> Result<bool> {
        let node = &mut self.nodes[id.index()];
        if !node.alive {
            return Ok(false);
        }
        let removed = node.debit_energy(cost)?;
        ledger.record(id, removed, !node.alive);
        Ok(true)
    }
}
