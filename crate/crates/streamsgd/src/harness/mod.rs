//! Experiment configs, runners and output writers.

pub mod config;
pub mod run;
pub mod svg;

pub use config::{parse_config, preset, preset_names, ExperimentKind, RawConfig, RunConfig};
pub use run::{run, verify_checks, Check, RunSummary};
