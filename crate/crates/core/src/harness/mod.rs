//! Experiment plumbing: configs, named presets, runs and their artifacts.

pub mod config;
pub mod io;
pub mod presets;
pub mod run;

pub use config::{
    parse_config, ConfigError, ExperimentConfig, ExperimentKind, LeaderSpec, TopologySpec,
};
pub use io::{format_sig, read_trajectory_csv, write_trajectory_csv};
pub use presets::{find_preset, PRESETS};
pub use run::{as_sweep, run_config, run_preset, RunOutput};
