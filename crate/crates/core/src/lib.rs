//! Round-based simulator for the LEACH clustering protocol and its O-LEACH
//! extension, which recovers orphan nodes through gateway sub-clusters.

pub mod config;
pub mod error;
pub mod leach;
pub mod metrics;
pub mod net;
pub mod oleach;
pub mod output;
pub mod radio;
pub mod sim;

pub use error::{ConfigError, Result, SimError};
