//! Result files written after a sweep.
//!
//! Every file here except `timing.csv` is a pure function of the config and
//! seeds, so two identical sweeps produce byte-identical copies. Numbers use
//! Rust's shortest round-trip decimal form, which is locale independent.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{self, write_atomic, RunResult, CONFIG_FILE, RUNS_DIR};
use crate::stats::{self, Comparison, SummaryStats};

pub const SUMMARY_FILE: &str = "summary.json";
pub const PER_SEED_FILE: &str = "per_seed.csv";
pub const TRACES_FILE: &str = "fitness_traces.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const COMPARISON_FILE: &str = "comparison.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub initial_best_fitness: Option<f64>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub train_mse: SummaryStats,
    pub test_mse: SummaryStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub method: String,
    pub config: ExperimentConfig,
    pub succeeded: usize,
    pub failed: usize,
    pub stats: MetricStats,
    pub runs: Vec<SeedRow>,
}

/// Stats over the successful runs; errors when there are none.
pub fn summarize_runs(results: &[RunResult]) -> Result<MetricStats, CliError> {
    let ok: Vec<&RunResult> = results.iter().filter(|r| r.succeeded()).collect();
    let train: Vec<f64> = ok.iter().filter_map(|r| r.train_mse).collect();
    let test: Vec<f64> = ok.iter().filter_map(|r| r.test_mse).collect();
    match (stats::summarize(&train), stats::summarize(&test)) {
        (Some(train_mse), Some(test_mse)) => Ok(MetricStats { train_mse, test_mse }),
        _ => Err(CliError::NoSuccessfulRuns(format!("{} runs, none succeeded", results.len()))),
    }
}

pub fn build_summary(config: &ExperimentConfig, results: &[RunResult]) -> Result<Summary, CliError> {
    let stats = summarize_runs(results)?;
    let succeeded = results.iter().filter(|r| r.succeeded()).count();
    Ok(Summary {
        name: config.name.clone(),
        method: config.method_name().to_string(),
        config: config.clone(),
        succeeded,
        failed: results.len() - succeeded,
        stats,
        runs: results
            .iter()
            .map(|r| SeedRow {
                seed: r.seed,
                train_mse: r.train_mse,
                test_mse: r.test_mse,
                initial_best_fitness: r.initial_best_fitness,
                flags: r.flags.clone(),
                error: r.error.clone(),
            })
            .collect(),
    })
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Quotes a CSV field when it holds a delimiter, quote or newline.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn per_seed_csv(results: &[RunResult]) -> String {
    let mut out = String::from("seed,status,train_mse,test_mse,flags\n");
    for r in results {
        let status = if r.succeeded() { "ok" } else { "failed" };
        let _ = writeln!(
            out,
            "{},{status},{},{},{}",
            r.seed,
            num(r.train_mse),
            num(r.test_mse),
            field(&r.flags.join(";"))
        );
    }
    out
}

/// One row per seed and swarm epoch; empty body for the baseline.
pub fn traces_csv(results: &[RunResult]) -> String {
    let mut out = String::from("seed,epoch,best_fitness\n");
    for r in results {
        for (i, f) in r.fitness_trace.iter().enumerate() {
            let _ = writeln!(out, "{},{},{f}", r.seed, i + 1);
        }
    }
    out
}

pub fn timing_csv(results: &[RunResult]) -> String {
    let mut out = String::from("seed,wall_time_s\n");
    for r in results {
        let _ = writeln!(out, "{},{}", r.seed, r.wall_time);
    }
    out
}

/// Writes the summary document and the CSV files into `dir`.
pub fn emit(dir: &Path, config: &ExperimentConfig, results: &[RunResult]) -> Result<Summary, CliError> {
    let summary = build_summary(config, results)?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&dir.join(SUMMARY_FILE), json.as_bytes())?;
    write_atomic(&dir.join(PER_SEED_FILE), per_seed_csv(results).as_bytes())?;
    write_atomic(&dir.join(TRACES_FILE), traces_csv(results).as_bytes())?;
    write_atomic(&dir.join(TIMING_FILE), timing_csv(results).as_bytes())?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<Summary, CliError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path,
        message: e.to_string(),
    })
}

/// Config and checkpoints of a results directory, ordered by seed.
pub fn load_results(dir: &Path) -> Result<(ExperimentConfig, Vec<RunResult>), CliError> {
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let runs = dir.join(RUNS_DIR);
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in fs::read_dir(&runs).map_err(CliError::io(&runs))? {
        let path = entry.map_err(CliError::io(&runs))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    let mut results = paths
        .iter()
        .map(|p| experiment::read_checkpoint(p))
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by_key(|r| r.seed);
    Ok((config, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: String,
    pub b: String,
    pub train_mse: Comparison,
    pub test_mse: Comparison,
}

pub fn compare_summaries(a: &Summary, b: &Summary) -> ComparisonReport {
    ComparisonReport {
        a: a.name.clone(),
        b: b.name.clone(),
        train_mse: stats::compare(&a.stats.train_mse, &b.stats.train_mse),
        test_mse: stats::compare(&a.stats.test_mse, &b.stats.test_mse),
    }
}

pub fn write_comparison(path: &Path, report: &ComparisonReport) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(report).expect("comparison serializes");
    write_atomic(path, json.as_bytes())
}
