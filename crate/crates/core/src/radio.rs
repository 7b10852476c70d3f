//! First-order radio energy model.
//!
//! Transmitting `l` bits over `d` meters costs `l·Eelec + l·εfs·d²` below the
//! crossover distance `d0 = √(εfs/εamp)` and `l·Eelec + l·εamp·d⁴` at or above
//! it. Receiving costs `l·Eelec`. Aggregation costs `EDA` per bit per fused
//! signal.

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Electronics energy, J/bit.
    pub e_elec: f64,
    /// Free-space amplifier, J/bit/m².
    pub eps_fs: f64,
    /// Multipath amplifier, J/bit/m⁴.
    pub eps_amp: f64,
    /// Data aggregation, J/bit/signal.
    pub e_da: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-12,
            eps_fs: 10e-12,
            eps_amp: 0.0013e-12,
            e_da: 5e-12,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fields = [
            ("e_elec", self.e_elec),
            ("eps_fs", self.eps_fs),
            ("eps_amp", self.eps_amp),
            ("e_da", self.e_da),
        ];
        for (field, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::range(
                    field,
                    format!("must be a positive finite number, got {v}"),
                ));
            }
        }
        Ok(())
    }

    fn d0(&self) -> f64 {
        (self.eps_fs / self.eps_amp).sqrt()
    }
}

/// Distance at which the free-space and multipath amplifier costs meet.
pub fn crossover_distance(p: &RadioParams) -> Result<f64, ConfigError> {
    p.validate()?;
    Ok(p.d0())
}

pub fn tx_cost(bits: u64, d: f64, p: &RadioParams) -> f64 {
    let l = bits as f64;
    let d2 = d * d;
    if d < p.d0() {
        l * p.e_elec + l * p.eps_fs * d2
    } else {
        l * p.e_elec + l * p.eps_amp * (d2 * d2)
    }
}

pub fn rx_cost(bits: u64, p: &RadioParams) -> f64 {
    bits as f64 * p.e_elec
}

/// Cost of fusing `n_signals` packets of `bits` bits into one.
pub fn aggregation_cost(bits: u64, n_signals: usize, p: &RadioParams) -> f64 {
    n_signals as f64 * bits as f64 * p.e_da
}
