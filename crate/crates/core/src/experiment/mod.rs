//! Experiment configuration and execution.
//!
//! A config names environments, policies and seeds; the runner executes
//! every combination, writes one CSV per run plus a manifest, and the summary
//! aggregates a finished directory.

mod config;
mod presets;
mod runner;
mod summary;

pub use config::{
    Alpha, AlphaKeyword, EnvKind, EnvSpec, ExperimentConfig, PolicyName, PolicySpec,
};
pub use presets::{
    bandit_means, describe, drawn_means, equal_breakpoints, good_bad_means, preset, BANDIT_HORIZON, PRESETS,
};
pub use runner::{
    bandit_runs, ceiling_run, config_hash, federated_run, read_csv, regret_rows, run_experiment,
    write_csv, FederatedRow, FederatedRun, Manifest, RegretRow, RunEntry, RunKind, CEILING,
    CSV_VERSION, MANIFEST_FILE,
};
pub use summary::{
    first_reaching, last_decade_slope, median, render, summarize, write_summary, Stat, SummaryRow,
    TARGET_FRACTION,
};
