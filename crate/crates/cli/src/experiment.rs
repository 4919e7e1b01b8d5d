//! Multi-seed sweeps with per-seed checkpoints.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pso_esn::data::{
    self, AffineMap, DataError, NarmaParams, TaskSplit, TimeSeries,
};
use pso_esn::esn::{self, EsnConfig};
use pso_esn::hybrid::{self, HybridConfig};
use pso_esn::spectral::{self, PowerIteration};
use pso_esn::derive_seed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BenchmarkConfig, CsvMode, ExperimentConfig, MethodConfig, NarmaTask};
use crate::error::CliError;

const DATA_STREAM: u64 = 0xda7a;
const MODEL_STREAM: u64 = 0x30de1;
const POWER_STREAM: u64 = 0x90e4;
const NARMA_RETRIES: u64 = 100;

pub const RUNS_DIR: &str = "runs";

pub const FLAG_NARMA_SUBSTITUTED: &str = "narma-seed-substituted";
pub const FLAG_SPECTRAL_UNCONVERGED: &str = "spectral-radius-unconverged";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    /// Both `None` when the run failed.
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub error: Option<String>,
    /// Seconds spent on this seed.
    pub wall_time: f64,
    /// Best training MSE after each swarm epoch (pso-esn only).
    #[serde(with = "infinite_as_null")]
    pub fitness_trace: Vec<f64>,
    #[serde(default)]
    pub initial_best_fitness: Option<f64>,
    pub flags: Vec<String>,
}

impl RunResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// JSON has no infinity; an all-failing swarm epoch is stored as `null`.
mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// Data for one seed, plus any flags raised while building it.
pub struct SeedData {
    pub split: TaskSplit,
    pub flags: Vec<String>,
}

pub(crate) fn narma_params(k: usize, length: usize, seed: u64, coefficients: Option<[f64; 4]>) -> NarmaParams {
    let standard = NarmaParams::standard(k, length, seed);
    match coefficients {
        Some([c1, c2, c3, c4]) => NarmaParams {
            c1,
            c2,
            c3,
            c4,
            ..standard
        },
        None => standard,
    }
}

#[allow(clippy::too_many_arguments)]
fn narma_split(
    k: usize,
    coefficients: Option<[f64; 4]>,
    train_len: usize,
    test_len: usize,
    task: NarmaTask,
    rescale: bool,
    washout: usize,
    seed: u64,
) -> Result<SeedData, CliError> {
    let length = train_len + test_len + 1;
    let mut flags = Vec::new();
    let mut attempt = 0;
    let generated = loop {
        let data_seed = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        match data::generate_narma(&narma_params(k, length, data_seed, coefficients)) {
            Ok(g) => break g,
            Err(DataError::NarmaDiverged { .. }) if attempt < NARMA_RETRIES => {
                attempt += 1;
            }
            Err(e) => return Err(e.into()),
        }
    };
    if attempt > 0 {
        flags.push(format!("{FLAG_NARMA_SUBSTITUTED}:{attempt}"));
    }
    let (drive, output) = if rescale {
        (data::rescale_unit(&generated.drive)?.0, data::rescale_unit(&generated.output)?.0)
    } else {
        (generated.drive, generated.output)
    };
    let split = match task {
        NarmaTask::Driven => data::driven_task(&drive, &output, train_len, test_len, washout)?,
        NarmaTask::OneStep => data::one_step_task(&output, train_len, test_len, washout)?,
        NarmaTask::SystemId => data::exogenous_task(&drive, &output, train_len, test_len, washout)?,
    };
    Ok(SeedData { split, flags })
}

/// CSV series, rescaled with a map fit on the training portion only.
fn csv_split(
    series: &TimeSeries,
    mode: CsvMode,
    lag: usize,
    train_len: usize,
    test_len: usize,
    rescale: bool,
    washout: usize,
) -> Result<SeedData, CliError> {
    let lag = match mode {
        CsvMode::OneStep => 1,
        CsvMode::Window => lag,
    };
    let needed = train_len + test_len + lag;
    if series.len() < needed {
        return Err(DataError::InsufficientLength {
            needed,
            available: series.len(),
        }
        .into());
    }
    let scaled;
    let series = if rescale {
        let map = AffineMap::fit(&series.values()[..train_len + lag])?;
        scaled = map.apply_series(series);
        &scaled
    } else {
        series
    };
    let split = data::window_task(series, lag, train_len, test_len, washout)?;
    Ok(SeedData {
        split,
        flags: Vec::new(),
    })
}

/// Loaded once per sweep: CSV data does not change between seeds.
enum DataSource {
    Narma {
        k: usize,
        coefficients: Option<[f64; 4]>,
        train_len: usize,
        test_len: usize,
        task: NarmaTask,
    },
    Csv {
        series: TimeSeries,
        mode: CsvMode,
        lag: usize,
        train_len: usize,
        test_len: usize,
    },
}

impl DataSource {
    fn open(config: &ExperimentConfig, base_dir: &Path) -> Result<Self, CliError> {
        Ok(match &config.benchmark {
            BenchmarkConfig::Narma {
                k,
                train_len,
                test_len,
                task,
                coefficients,
            } => DataSource::Narma {
                k: *k,
                coefficients: *coefficients,
                train_len: *train_len,
                test_len: *test_len,
                task: *task,
            },
            BenchmarkConfig::Csv {
                path,
                column,
                mode,
                lag,
                train_len,
                test_len,
            } => DataSource::Csv {
                series: data::load_csv(base_dir.join(path), &column.into())?,
                mode: *mode,
                lag: *lag,
                train_len: *train_len,
                test_len: *test_len,
            },
        })
    }

    fn build(&self, rescale: bool, washout: usize, seed: u64) -> Result<SeedData, CliError> {
        match self {
            DataSource::Narma {
                k,
                coefficients,
                train_len,
                test_len,
                task,
            } => narma_split(*k, *coefficients, *train_len, *test_len, *task, rescale, washout, derive_seed(seed, DATA_STREAM)),
            DataSource::Csv {
                series,
                mode,
                lag,
                train_len,
                test_len,
            } => csv_split(series, *mode, *lag, *train_len, *test_len, rescale, washout),
        }
    }
}

/// Per-seed data for `config`, as the sweep builds it.
pub fn build_seed_data(config: &ExperimentConfig, base_dir: &Path, seed: u64) -> Result<SeedData, CliError> {
    DataSource::open(config, base_dir)?.build(config.rescale, config.esn.washout, seed)
}

/// Seed used to initialize the network for sweep seed `seed`. Both methods
/// draw the same initial network for the same seed.
pub fn model_seed(seed: u64) -> u64 {
    derive_seed(seed, MODEL_STREAM)
}

struct Trained {
    train_mse: f64,
    test_mse: f64,
    trace: Vec<f64>,
    initial_best_fitness: Option<f64>,
    flags: Vec<String>,
}

fn train_baseline(esn_config: &EsnConfig, split: &TaskSplit, seed: u64) -> Result<Trained, CliError> {
    let mut weights = esn::init_weights(esn_config, seed)?;
    let mut flags = Vec::new();
    if let Some(rho) = esn_config.target_rho {
        let params = PowerIteration::with_seed(derive_seed(seed, POWER_STREAM));
        let (scaled, estimate) = spectral::rescale_reservoir(&weights, rho, &params)?;
        if !estimate.converged {
            flags.push(FLAG_SPECTRAL_UNCONVERGED.to_string());
        }
        weights = scaled;
    }
    let (trained, train_mse) = esn::fit_readout(&weights, &split.train, esn_config.ridge_gamma)?;
    let test_mse = esn::evaluate_mse(&trained, &split.test)?;
    Ok(Trained {
        train_mse,
        test_mse,
        trace: Vec::new(),
        initial_best_fitness: None,
        flags,
    })
}

fn train_hybrid(hybrid_config: &HybridConfig, split: &TaskSplit) -> Result<Trained, CliError> {
    let model = hybrid::train_pso_esn(hybrid_config, &split.train)?;
    let test_mse = esn::evaluate_mse(&model.weights, &split.test)?;
    Ok(Trained {
        train_mse: model.train_mse,
        test_mse,
        trace: model.outcome.trace,
        initial_best_fitness: Some(model.outcome.initial_best_fitness),
        flags: Vec::new(),
    })
}

fn run_one(config: &ExperimentConfig, source: &DataSource, seed: u64) -> RunResult {
    let start = Instant::now();
    let outcome = (|| -> Result<(Trained, Vec<String>), CliError> {
        let data = source.build(config.rescale, config.esn.washout, seed)?;
        let esn_config = config.esn_config()?;
        let trained = match &config.method {
            MethodConfig::EsnBaseline => train_baseline(&esn_config, &data.split, model_seed(seed))?,
            MethodConfig::PsoEsn(p) => {
                let hc = HybridConfig::new(esn_config, p.pso_config(), p.subset_size()?, model_seed(seed))?;
                train_hybrid(&hc, &data.split)?
            }
        };
        for (name, v) in [("train", trained.train_mse), ("test", trained.test_mse)] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("{name} MSE is not finite")));
            }
        }
        Ok((trained, data.flags))
    })();
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok((t, mut flags)) => {
            flags.extend(t.flags);
            RunResult {
                seed,
                train_mse: Some(t.train_mse),
                test_mse: Some(t.test_mse),
                error: None,
                wall_time,
                fitness_trace: t.trace,
                initial_best_fitness: t.initial_best_fitness,
                flags,
            }
        }
        Err(e) => RunResult {
            seed,
            train_mse: None,
            test_mse: None,
            error: Some(e.to_string()),
            wall_time,
            fitness_trace: Vec::new(),
            initial_best_fitness: None,
            flags: Vec::new(),
        },
    }
}

pub fn checkpoint_path(output_dir: &Path, seed: u64) -> PathBuf {
    output_dir.join(RUNS_DIR).join(format!("seed-{seed}.json"))
}

/// Write-then-rename so a reader never sees a partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(contents).map_err(CliError::io(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<RunResult, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Config identity for resuming: the seed count and output location may differ.
fn same_experiment(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    let strip = |c: &ExperimentConfig| ExperimentConfig {
        n_seeds: 1,
        output_dir: PathBuf::new(),
        ..c.clone()
    };
    strip(a) == strip(b)
}

pub const CONFIG_FILE: &str = "config.toml";

/// Runs every seed not already checkpointed under `output_dir` and returns
/// all results for the configured seeds, ordered by seed. Relative data
/// paths are resolved against `base_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    output_dir: &Path,
    base_dir: &Path,
) -> Result<Vec<RunResult>, CliError> {
    config.validate()?;
    let config_path = output_dir.join(CONFIG_FILE);
    if config_path.exists() {
        let previous = ExperimentConfig::load(&config_path)?;
        if !same_experiment(&previous, config) {
            return Err(CliError::Resume(format!(
                "{} holds results for a different experiment; choose another output directory",
                output_dir.display()
            )));
        }
    }
    write_atomic(&config_path, config.to_toml().as_bytes())?;

    let source = DataSource::open(config, base_dir)?;
    let seeds: Vec<u64> = config.seeds().collect();
    let mut results: Vec<RunResult> = seeds
        .par_iter()
        .map(|&seed| -> Result<RunResult, CliError> {
            let path = checkpoint_path(output_dir, seed);
            if path.exists() {
                let done = read_checkpoint(&path)?;
                if done.seed != seed {
                    return Err(CliError::Malformed {
                        path,
                        message: format!("holds seed {}", done.seed),
                    });
                }
                return Ok(done);
            }
            let result = run_one(config, &source, seed);
            let json = serde_json::to_string_pretty(&result).expect("run result serializes");
            write_atomic(&path, json.as_bytes())?;
            report(&result);
            Ok(result)
        })
        .collect::<Result<_, _>>()?;
    results.sort_by_key(|r| r.seed);

    if results.iter().all(|r| !r.succeeded()) {
        let first = results[0].error.clone().unwrap_or_default();
        return Err(CliError::NoSuccessfulRuns(format!(
            "all {} seeds failed; seed {}: {first}",
            results.len(),
            results[0].seed
        )));
    }
    Ok(results)
}

fn report(r: &RunResult) {
    match (&r.error, r.test_mse) {
        (None, Some(test)) => eprintln!("seed {}: test_mse {test} ({:.1}s)", r.seed, r.wall_time),
        (Some(e), _) => eprintln!("seed {}: failed: {e}", r.seed),
        _ => {}
    }
}
