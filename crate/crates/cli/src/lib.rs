//! Experiment runner for echo state network and PSO-ESN sweeps.
//!
//! A sweep is described by a TOML [`config::ExperimentConfig`], runs one
//! independent pipeline per seed, checkpoints each seed under
//! `<output_dir>/runs/`, and finally writes a JSON summary plus plot-ready
//! CSV files (see [`emit`]).

pub mod cli;
pub mod config;
pub mod emit;
mod error;
pub mod experiment;
pub mod stats;

pub use cli::{cli_main, OUTPUT_ROOT_ENV};
pub use error::CliError;
