//! Experiment configuration, baselines, Monte-Carlo runner and CLI.

pub mod cli;
pub mod config;
pub mod experiment;

pub use cli::cli_main;
pub use experiment::{
    initialize_state, quantize_phases, run_baseline, run_experiment, trial_seed, write_results, Algorithm,
    ExperimentResult, ExperimentSpec, Quantization, ResultRow, SummaryRow, Sweep, CSV_HEADER,
};
