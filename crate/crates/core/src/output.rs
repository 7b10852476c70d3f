//! CSV traces and plain-text summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::metrics::{RoundMetrics, SimulationTrace};
use crate::net::Protocol;

fn csv_row(m: &RoundMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{:.12},{:.12},{:.15e},{:.15e},{},{}\n",
        m.round,
        m.alive,
        m.heads,
        m.orphans_total,
        m.orphans_recovered,
        m.gateways,
        m.connectivity_rate,
        m.coverage_rate,
        m.energy_dissipated,
        m.energy_remaining,
        m.packets_to_bs,
        m.sources_delivered,
    )
}

/// Header plus one row per round.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = RoundMetrics::FIELDS.join(",");
    out.push('\n');
    for m in &trace.rounds {
        out.push_str(&csv_row(m));
    }
    out
}

pub fn emit_csv(trace: &SimulationTrace, path: &Path) -> Result<()> {
    fs::write(path, trace_csv(trace)).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Column {
    values: Vec<String>,
}

fn opt(v: Option<u32>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn summary_column(t: &SimulationTrace) -> Column {
    let lt = t.lifetime;
    Column {
        values: vec![
            t.protocol().to_string(),
            t.rounds.len().to_string(),
            t.termination.as_str().to_string(),
            opt(lt.first_node_death),
            opt(lt.half_nodes_dead),
            opt(lt.last_node_death),
            format!("{:.6}", t.mean(|m| m.connectivity_rate)),
            format!("{:.6}", t.mean(|m| m.coverage_rate)),
            t.total(|m| m.orphans_total).to_string(),
            t.total(|m| m.orphans_recovered).to_string(),
            t.total(|m| m.gateways).to_string(),
            t.total(|m| m.packets_to_bs).to_string(),
            t.total(|m| m.sources_delivered).to_string(),
        ],
    }
}

const ROWS: [&str; 13] = [
    "protocol",
    "rounds",
    "termination",
    "first_node_death",
    "half_nodes_dead",
    "last_node_death",
    "mean_connectivity",
    "mean_coverage",
    "orphans_total",
    "orphans_recovered",
    "gateway_rounds",
    "packets_to_bs",
    "sources_delivered",
];

fn delta_column(base: &SimulationTrace, other: &SimulationTrace) -> Column {
    let int = |a: usize, b: usize| format!("{:+}", b as i64 - a as i64);
    let opt_delta = |a: Option<u32>, b: Option<u32>| match (a, b) {
        (Some(a), Some(b)) => format!("{:+}", i64::from(b) - i64::from(a)),
        _ => "-".to_string(),
    };
    let float = |f: fn(&RoundMetrics) -> f64| format!("{:+.6}", other.mean(f) - base.mean(f));
    let (lb, lo) = (base.lifetime, other.lifetime);
    Column {
        values: vec![
            "delta".to_string(),
            int(base.rounds.len(), other.rounds.len()),
            String::new(),
            opt_delta(lb.first_node_death, lo.first_node_death),
            opt_delta(lb.half_nodes_dead, lo.half_nodes_dead),
            opt_delta(lb.last_node_death, lo.last_node_death),
            float(|m| m.connectivity_rate),
            float(|m| m.coverage_rate),
            int(base.total(|m| m.orphans_total), other.total(|m| m.orphans_total)),
            int(base.total(|m| m.orphans_recovered), other.total(|m| m.orphans_recovered)),
            int(base.total(|m| m.gateways), other.total(|m| m.gateways)),
            int(base.total(|m| m.packets_to_bs), other.total(|m| m.packets_to_bs)),
            int(base.total(|m| m.sources_delivered), other.total(|m| m.sources_delivered)),
        ],
    }
}

/// Side-by-side lifetime and delivery summary. With a LEACH and an O-LEACH
/// trace, a delta column (O-LEACH minus LEACH) is appended.
pub fn emit_summary(traces: &[SimulationTrace]) -> String {
    let mut columns: Vec<Column> = traces.iter().map(summary_column).collect();
    let leach = traces.iter().find(|t| t.protocol() == Protocol::Leach);
    let oleach = traces.iter().find(|t| t.protocol() == Protocol::OLeach);
    if let (Some(l), Some(o)) = (leach, oleach) {
        columns.push(delta_column(l, o));
    }
    let mut out = String::new();
    for (i, label) in ROWS.iter().enumerate() {
        let _ = write!(out, "{label:<20}");
        for c in &columns {
            let _ = write!(out, "{:>16}", c.values[i]);
        }
        // trailing spaces from empty cells are noise
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}
