//! Flat `key=value` run configuration.
//!
//! One key per line; blank lines and `#` comments are ignored, as is anything
//! after a `#` on a value line. Missing keys keep their defaults, unknown or
//! repeated keys are rejected.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::net::Protocol;
use crate::sim::RunSpec;

pub const KEYS: [&str; 18] = [
    "n_nodes",
    "field_width",
    "field_height",
    "sink_x",
    "sink_y",
    "initial_energy",
    "ch_probability",
    "clustering_rate_cap",
    "tx_range",
    "packet_bits",
    "control_bits",
    "e_elec",
    "eps_fs",
    "eps_amp",
    "e_da",
    "max_rounds",
    "seed",
    "protocol",
];

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Malformed {
        line,
        message: format!("cannot parse `{raw}` as a value for `{key}`"),
    })
}

/// Applies a `protocol` value: `leach`, `oleach` or `compare`.
pub fn apply_protocol(spec: &mut RunSpec, raw: &str) -> Result<(), String> {
    if raw == "compare" {
        spec.compare = true;
    } else {
        spec.network.protocol = raw.parse::<Protocol>()?;
        spec.compare = false;
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    let mut spec = RunSpec::default();
    let mut seen = BTreeSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, raw) = content.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            message: format!("expected `key=value`, got `{content}`"),
        })?;
        let key = key.trim();
        let raw = raw.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        let net = &mut spec.network;
        let radio = &mut spec.radio;
        match key {
            "n_nodes" => net.n_nodes = value(line, key, raw)?,
            "field_width" => net.field_width = value(line, key, raw)?,
            "field_height" => net.field_height = value(line, key, raw)?,
            "sink_x" => net.sink.x = value(line, key, raw)?,
            "sink_y" => net.sink.y = value(line, key, raw)?,
            "initial_energy" => net.initial_energy = value(line, key, raw)?,
            "ch_probability" => net.ch_probability = value(line, key, raw)?,
            "clustering_rate_cap" => net.clustering_rate_cap = value(line, key, raw)?,
            "tx_range" => net.tx_range = value(line, key, raw)?,
            "packet_bits" => net.packet_bits = value(line, key, raw)?,
            "control_bits" => net.control_bits = value(line, key, raw)?,
            "e_elec" => radio.e_elec = value(line, key, raw)?,
            "eps_fs" => radio.eps_fs = value(line, key, raw)?,
            "eps_amp" => radio.eps_amp = value(line, key, raw)?,
            "e_da" => radio.e_da = value(line, key, raw)?,
            "max_rounds" => net.max_rounds = value(line, key, raw)?,
            "seed" => net.seed = value(line, key, raw)?,
            "protocol" => {
                apply_protocol(&mut spec, raw)
                    .map_err(|message| ConfigError::Malformed { line, message })?;
            }
            _ => unreachable!("key list and match arms out of sync"),
        }
    }
    spec.validate()?;
    Ok(spec)
}
