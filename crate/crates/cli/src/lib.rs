//! Configuration, command execution and result files for the `dislocade`
//! binary. Kept as a library so the round-trip and determinism properties
//! can be tested without spawning processes.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, Command, ConfigError, GammaSpec, RunConfig};
pub use run::{execute, Manifest, Outcome, RunError};
