//! Benchmark series and supervised task construction.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::esn::{EsnError, SupervisedSequence};
use crate::interval::Interval;
use crate::seed::seeded_rng;

/// Magnitude beyond which a NARMA series is declared divergent.
pub const NARMA_DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: column {column} not found")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: column {column} holds no values")]
    EmptyColumn { path: PathBuf, column: String },
    #[error("series {name} has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
    #[error("series is constant; cannot rescale to [0, 1]")]
    ConstantSeries,
    #[error("need {needed} samples, series has {available}")]
    InsufficientLength { needed: usize, available: usize },
    #[error("NARMA series diverged at step {step}")]
    NarmaDiverged { step: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Esn(#[from] EsnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, DataError> {
        let name = name.into();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite { name, index });
        }
        Ok(Self { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parameters of the NARMA-k recurrence
/// `b(t+1) = c1 b(t) + c2 b(t) sum_{i<k} b(t-i) + c3 s(t-k+1) s(t) + c4`.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaParams {
    pub k: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub noise_range: Interval,
    /// Total number of samples, including the `k` zero initial values.
    pub length: usize,
    pub seed: u64,
}

impl NarmaParams {
    /// Standard coefficients (0.3, 0.05, 1.5, 0.1) with `s ~ U[0, 0.5]`.
    pub fn standard(k: usize, length: usize, seed: u64) -> Self {
        Self {
            k,
            c1: 0.3,
            c2: 0.05,
            c3: 1.5,
            c4: 0.1,
            noise_range: Interval::new(0.0, 0.5).expect("valid interval"),
            length,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.k == 0 {
            return Err(DataError::InvalidParams("NARMA order k must be at least 1".into()));
        }
        if self.length <= self.k {
            return Err(DataError::InvalidParams(format!(
                "length {} must exceed the order {}",
                self.length, self.k
            )));
        }
        Ok(())
    }
}

/// A generated NARMA series together with the noise `s(t)` that drove it.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaSeries {
    pub output: TimeSeries,
    pub drive: TimeSeries,
}

/// Apply the recurrence to a given noise sequence. The first `k` outputs
/// are zero; the first active value is `b(k)`, computed from `t = k - 1`.
pub fn narma_recurrence(params: &NarmaParams, noise: &[f64]) -> Result<Vec<f64>, DataError> {
    params.validate()?;
    if noise.len() != params.length {
        return Err(DataError::InvalidParams(format!(
            "noise has {} values, expected {}",
            noise.len(),
            params.length
        )));
    }
    let k = params.k;
    let mut b = vec![0.0; params.length];
    for t in (k - 1)..(params.length - 1) {
        let window: f64 = (0..k).map(|i| b[t - i]).sum();
        let next = params.c1 * b[t] + params.c2 * b[t] * window + params.c3 * noise[t + 1 - k] * noise[t] + params.c4;
        if !next.is_finite() || next.abs() > NARMA_DIVERGENCE_BOUND {
            return Err(DataError::NarmaDiverged { step: t + 1 });
        }
        b[t + 1] = next;
    }
    Ok(b)
}

pub fn generate_narma(params: &NarmaParams) -> Result<NarmaSeries, DataError> {
    params.validate()?;
    let mut rng = seeded_rng(params.seed);
    let noise: Vec<f64> = (0..params.length)
        .map(|_| params.noise_range.sample(&mut rng))
        .collect();
    let output = narma_recurrence(params, &noise)?;
    Ok(NarmaSeries {
        output: TimeSeries::new(format!("narma{}", params.k), output)?,
        drive: TimeSeries::new(format!("narma{}-drive", params.k), noise)?,
    })
}

/// Affine map sending `[min, max]` of the fitted data onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub min: f64,
    pub max: f64,
}

impl AffineMap {
    pub fn fit(values: &[f64]) -> Result<Self, DataError> {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || min >= max {
            return Err(DataError::ConstantSeries);
        }
        Ok(Self { min, max })
    }

    pub fn apply(&self, v: f64) -> f64 {
        if v == self.max {
            1.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, u: f64) -> f64 {
        self.min + u * (self.max - self.min)
    }

    pub fn apply_series(&self, series: &TimeSeries) -> TimeSeries {
        TimeSeries {
            name: series.name.clone(),
            values: series.values.iter().map(|v| self.apply(*v)).collect(),
        }
    }
}

/// Rescale a series onto `[0, 1]` and return the map used.
pub fn rescale_unit(series: &TimeSeries) -> Result<(TimeSeries, AffineMap), DataError> {
    let map = AffineMap::fit(&series.values)?;
    Ok((map.apply_series(series), map))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl std::fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "#{i}"),
            ColumnSelector::Name(n) => write!(f, "{n:?}"),
        }
    }
}

/// Read one numeric column of a comma-separated file. A first row whose
/// selected field does not parse as a number is taken as the header.
pub fn load_csv(path: impl AsRef<Path>, column: &ColumnSelector) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: u64, message: String| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let missing = || DataError::MissingColumn {
        path: path.to_path_buf(),
        column: column.to_string(),
    };

    let mut index = match column {
        ColumnSelector::Index(i) => Some(*i),
        ColumnSelector::Name(_) => None,
    };
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(row as u64 + 1, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if row == 0 {
            if let ColumnSelector::Name(name) = column {
                let pos = record.iter().position(|f| f == name).ok_or_else(missing)?;
                index = Some(pos);
                continue;
            }
        }
        let col = index.expect("column resolved");
        let field = record.get(col).ok_or_else(|| {
            if row == 0 {
                missing()
            } else {
                parse_err(line, format!("row has no column {col}"))
            }
        })?;
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => return Err(parse_err(line, format!("non-finite value {field:?}"))),
            Err(_) if row == 0 => continue,
            Err(_) => return Err(parse_err(line, format!("not a number: {field:?}"))),
        }
    }
    if values.is_empty() {
        return Err(DataError::EmptyColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TimeSeries::new(name, values)
}

/// Chronological train/test pair of supervised sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub train: SupervisedSequence,
    pub test: SupervisedSequence,
}

fn split_pairs(
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    train_len: usize,
    test_len: usize,
    washout: usize,
) -> Result<TaskSplit, DataError> {
    let na = inputs.ncols();
    let nb = targets.ncols();
    let train = SupervisedSequence::new(
        inputs.view((0, 0), (train_len, na)).into_owned(),
        targets.view((0, 0), (train_len, nb)).into_owned(),
        washout,
    )?;
    let test = SupervisedSequence::new(
        inputs.view((train_len, 0), (test_len, na)).into_owned(),
        targets.view((train_len, 0), (test_len, nb)).into_owned(),
        washout,
    )?;
    Ok(TaskSplit { train, test })
}

/// Inputs `(b(t-lag+1), ..., b(t))`, target `b(t+1)`. The first
/// `train_len` pairs train, the next `test_len` pairs test.
pub fn window_task(
    series: &TimeSeries,
    lag: usize,
    train_len: usize,
    test_len: usize,
    washout: usize,
) -> Result<TaskSplit, DataError> {
    if lag == 0 {
        return Err(DataError::InvalidParams("window lag must be at least 1".into()));
    }
    let needed = train_len + test_len + lag;
    if series.len() < needed {
        return Err(DataError::InsufficientLength {
            needed,
            available: series.len(),
        });
    }
    let pairs = train_len + test_len;
    let b = series.values();
    let inputs = DMatrix::from_fn(pairs, lag, |j, i| b[j + i]);
    let targets = DMatrix::from_fn(pairs, 1, |j, _| b[j + lag]);
    split_pairs(inputs, targets, train_len, test_len, washout)
}

/// Input `b(t)`, target `b(t+1)`.
pub fn one_step_task(
    series: &TimeSeries,
    train_len: usize,
    test_len: usize,
    washout: usize,
) -> Result<TaskSplit, DataError> {
    window_task(series, 1, train_len, test_len, washout)
}

/// Inputs `(s(t), b(t))`, target `b(t+1)`: one-step-ahead prediction of a
/// series that also sees the exogenous signal driving it.
pub fn driven_task(
    drive: &TimeSeries,
    series: &TimeSeries,
    train_len: usize,
    test_len: usize,
    washout: usize,
) -> Result<TaskSplit, DataError> {
    if drive.len() != series.len() {
        return Err(DataError::InvalidParams(format!(
            "drive has {} samples, series has {}",
            drive.len(),
            series.len()
        )));
    }
    let needed = train_len + test_len + 1;
    if series.len() < needed {
        return Err(DataError::InsufficientLength {
            needed,
            available: series.len(),
        });
    }
    let pairs = train_len + test_len;
    let (s, b) = (drive.values(), series.values());
    let inputs = DMatrix::from_fn(pairs, 2, |j, i| if i == 0 { s[j] } else { b[j] });
    let targets = DMatrix::from_fn(pairs, 1, |j, _| b[j + 1]);
    split_pairs(inputs, targets, train_len, test_len, washout)
}

/// Input `s(t)`, target `b(t+1)`: identify the system from its drive alone.
pub fn exogenous_task(
    drive: &TimeSeries,
    series: &TimeSeries,
    train_len: usize,
    test_len: usize,
    washout: usize,
) -> Result<TaskSplit, DataError> {
    let full = driven_task(drive, series, train_len, test_len, washout)?;
    let drop_series = |seq: SupervisedSequence| {
        SupervisedSequence::new(seq.inputs().columns(0, 1).into_owned(), seq.targets().clone(), seq.washout())
    };
    Ok(TaskSplit {
        train: drop_series(full.train)?,
        test: drop_series(full.test)?,
    })
}
