//! Batch front end for `aerolink-core`: configuration files, parallel
//! Monte-Carlo execution, CSV artifacts and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod runner;

pub use config::{parse_config, ConfigError, ScenarioConfig};
