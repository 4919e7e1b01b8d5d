//! Declarative experiment configuration, stored as TOML.

use std::path::{Path, PathBuf};

use pso_esn::data::ColumnSelector;
use pso_esn::esn::EsnConfig;
use pso_esn::hybrid::SubsetSize;
use pso_esn::pso::{PsoConfig, DEFAULT_ACCELERATION, DEFAULT_INERTIA};
use pso_esn::Interval;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_seeds() -> usize {
    30
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Map the data onto `[0, 1]` before building tasks.
    #[serde(default = "default_true")]
    pub rescale: bool,
    pub output_dir: PathBuf,
    pub benchmark: BenchmarkConfig,
    pub esn: EsnSection,
    pub method: MethodConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NarmaTask {
    /// Inputs `(s(t), b(t))`, target `b(t+1)`.
    Driven,
    /// Input `b(t)`, target `b(t+1)`.
    OneStep,
    /// Input `s(t)`, target `b(t+1)`.
    SystemId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&ColumnRef> for ColumnSelector {
    fn from(c: &ColumnRef) -> Self {
        match c {
            ColumnRef::Index(i) => ColumnSelector::Index(*i),
            ColumnRef::Name(n) => ColumnSelector::Name(n.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsvMode {
    /// Input `b(t)`, target `b(t+1)`.
    OneStep,
    /// Inputs `b(t-lag+1), ..., b(t)`, target `b(t+1)`.
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BenchmarkConfig {
    Narma {
        k: usize,
        train_len: usize,
        test_len: usize,
        #[serde(default = "default_task")]
        task: NarmaTask,
        /// `[c1, c2, c3, c4]`; the standard `[0.3, 0.05, 1.5, 0.1]` when absent.
        #[serde(default)]
        coefficients: Option<[f64; 4]>,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_column")]
        column: ColumnRef,
        mode: CsvMode,
        #[serde(default = "default_lag")]
        lag: usize,
        train_len: usize,
        test_len: usize,
    },
}

fn default_task() -> NarmaTask {
    NarmaTask::Driven
}

fn default_lag() -> usize {
    1
}

fn default_column() -> ColumnRef {
    ColumnRef::Index(0)
}

impl BenchmarkConfig {
    pub fn n_inputs(&self) -> usize {
        match self {
            BenchmarkConfig::Narma { task: NarmaTask::Driven, .. } => 2,
            BenchmarkConfig::Narma { .. } => 1,
            BenchmarkConfig::Csv { mode: CsvMode::OneStep, .. } => 1,
            BenchmarkConfig::Csv { mode: CsvMode::Window, lag, .. } => *lag,
        }
    }
}

/// Reservoir settings; input and output sizes follow from the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsnSection {
    pub n_res: usize,
    pub input_range: [f64; 2],
    pub res_range: [f64; 2],
    pub density: f64,
    /// Spectral radius the baseline is rescaled to. Ignored by pso-esn.
    #[serde(default)]
    pub target_rho: Option<f64>,
    pub ridge_gamma: f64,
    pub washout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    EsnBaseline,
    PsoEsn(PsoSection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    /// Number of tuned reservoir weights. Exactly one of `subset` and `alpha`.
    #[serde(default)]
    pub subset: Option<usize>,
    /// Fraction of reservoir connections to tune.
    #[serde(default)]
    pub alpha: Option<f64>,
    pub particles: usize,
    pub epochs: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_acceleration")]
    pub accel_personal: f64,
    #[serde(default = "default_acceleration")]
    pub accel_global: f64,
    #[serde(default)]
    pub velocity_clamp: Option<f64>,
}

fn default_inertia() -> f64 {
    DEFAULT_INERTIA
}

fn default_acceleration() -> f64 {
    DEFAULT_ACCELERATION
}

impl PsoSection {
    pub fn subset_size(&self) -> Result<SubsetSize, CliError> {
        match (self.subset, self.alpha) {
            (Some(m), None) => Ok(SubsetSize::Count(m)),
            (None, Some(a)) => Ok(SubsetSize::Fraction(a)),
            _ => Err(CliError::Config("method needs exactly one of `subset` and `alpha`".into())),
        }
    }

    /// Swarm settings with the dimension, range and seed left for the
    /// hybrid to fill in.
    pub fn pso_config(&self) -> PsoConfig {
        PsoConfig {
            inertia: self.inertia,
            accel_personal: self.accel_personal,
            accel_global: self.accel_global,
            velocity_clamp: self.velocity_clamp,
            ..PsoConfig::new(self.particles, 1, Interval::symmetric(1.0).expect("unit interval"), self.epochs, 0)
        }
    }
}

fn interval(name: &str, pair: [f64; 2]) -> Result<Interval, CliError> {
    Interval::new(pair[0], pair[1]).map_err(|e| CliError::Config(format!("{name}: {e}")))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn esn_config(&self) -> Result<EsnConfig, CliError> {
        let e = &self.esn;
        Ok(EsnConfig {
            n_in: self.benchmark.n_inputs(),
            n_res: e.n_res,
            n_out: 1,
            input_range: interval("input_range", e.input_range)?,
            res_range: interval("res_range", e.res_range)?,
            density: e.density,
            target_rho: e.target_rho,
            ridge_gamma: e.ridge_gamma,
            washout: e.washout,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_seeds == 0 {
            return Err(CliError::Config("n_seeds must be at least 1".into()));
        }
        if self.base_seed.checked_add(self.n_seeds as u64).is_none() {
            return Err(CliError::Config("base_seed + n_seeds overflows".into()));
        }
        let esn = self.esn_config()?;
        esn.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(rho) = esn.target_rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(CliError::Config(format!("target_rho must be positive, got {rho}")));
            }
        }
        match &self.benchmark {
            BenchmarkConfig::Narma {
                k,
                train_len,
                test_len,
                coefficients,
                ..
            } => {
                if *k == 0 {
                    return Err(CliError::Config("narma k must be at least 1".into()));
                }
                if coefficients.is_some_and(|c| c.iter().any(|v| !v.is_finite())) {
                    return Err(CliError::Config("narma coefficients must be finite".into()));
                }
                check_split(*train_len, *test_len, esn.washout)?;
            }
            BenchmarkConfig::Csv { mode, lag, train_len, test_len, .. } => {
                if *mode == CsvMode::Window && *lag == 0 {
                    return Err(CliError::Config("window lag must be at least 1".into()));
                }
                check_split(*train_len, *test_len, esn.washout)?;
            }
        }
        if let MethodConfig::PsoEsn(p) = &self.method {
            let subset = p.subset_size()?;
            subset
                .resolve(esn.connection_count())
                .map_err(|e| CliError::Config(e.to_string()))?;
            p.pso_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.base_seed..self.base_seed + self.n_seeds as u64
    }

    pub fn method_name(&self) -> &'static str {
        match self.method {
            MethodConfig::EsnBaseline => "esn-baseline",
            MethodConfig::PsoEsn(_) => "pso-esn",
        }
    }
}

fn check_split(train_len: usize, test_len: usize, washout: usize) -> Result<(), CliError> {
    if washout >= train_len || washout >= test_len {
        return Err(CliError::Config(format!(
            "washout {washout} must be shorter than both train_len {train_len} and test_len {test_len}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const NARMA_PSO: &str = r#"
name = "narma10-pso"
n_seeds = 3
base_seed = 7
output_dir = "out/narma10-pso"

[benchmark]
kind = "narma"
k = 10
train_len = 1990
test_len = 390

[esn]
n_res = 150
input_range = [-0.4, 0.4]
res_range = [-0.2, 0.2]
density = 0.3
ridge_gamma = 1e-3
washout = 100

[method]
kind = "pso-esn"
subset = 30
particles = 35
epochs = 40
"#;

    const CSV_BASELINE: &str = r#"
name = "laser"
output_dir = "out/laser"
rescale = false

[benchmark]
kind = "csv"
path = "data/laser.csv"
column = "value"
mode = "window"
lag = 3
train_len = 499
test_len = 500

[esn]
n_res = 40
input_range = [-0.8, 0.8]
res_range = [-0.2, 0.2]
density = 0.3
target_rho = 0.9
ridge_gamma = 1e-3
washout = 30

[method]
kind = "esn-baseline"
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(NARMA_PSO).unwrap();
        assert_eq!(c.n_seeds, 3);
        assert!(c.rescale);
        assert_eq!(c.benchmark.n_inputs(), 2);
        let MethodConfig::PsoEsn(p) = &c.method else { panic!() };
        assert_eq!(p.inertia, DEFAULT_INERTIA);
        assert_eq!(p.subset_size().unwrap(), SubsetSize::Count(30));
        assert_eq!(c.seeds().collect::<Vec<_>>(), vec![7, 8, 9]);

        let c = ExperimentConfig::from_toml(CSV_BASELINE).unwrap();
        assert_eq!(c.n_seeds, 30);
        assert_eq!(c.benchmark.n_inputs(), 3);
        assert_eq!(c.esn_config().unwrap().target_rho, Some(0.9));
    }

    #[test]
    fn toml_roundtrip_is_lossless() {
        for text in [NARMA_PSO, CSV_BASELINE] {
            let c = ExperimentConfig::from_toml(text).unwrap();
            let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(c, again);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            NARMA_PSO.replace("n_seeds = 3", "n_seeds = 0"),
            NARMA_PSO.replace("subset = 30", "subset = 30\nalpha = 0.1"),
            NARMA_PSO.replace("subset = 30", ""),
            NARMA_PSO.replace("subset = 30", "subset = 100000"),
            NARMA_PSO.replace("washout = 100", "washout = 400"),
            NARMA_PSO.replace("density = 0.3", "density = 1.5"),
            NARMA_PSO.replace("k = 10", "k = 10\nbogus = 1"),
            NARMA_PSO.replace("input_range = [-0.4, 0.4]", "input_range = [0.4, -0.4]"),
            CSV_BASELINE.replace("lag = 3", "lag = 0"),
        ];
        for text in &cases {
            assert!(ExperimentConfig::from_toml(text).is_err(), "accepted:\n{text}");
        }
    }
}
