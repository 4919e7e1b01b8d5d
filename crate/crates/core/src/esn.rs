//! Canonical echo state network.
//!
//! The reservoir state evolves as
//! `x(t) = tanh(W_in [1; a(t)] + W_r x(t-1))` and the output is the linear
//! readout `y(t) = W_out [1; a(t); x(t)]`. Only `W_out` is trained, by ridge
//! regression over the states harvested after the washout.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use thiserror::Error;

use crate::interval::Interval;
use crate::ridge;
use crate::seed::seeded_rng;

#[derive(Debug, Error, PartialEq)]
pub enum EsnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("reservoir entry ({row}, {col}) is outside the mask but nonzero")]
    MaskViolation { row: usize, col: usize },
    #[error("invalid mask position ({row}, {col}) for a {size}x{size} reservoir")]
    MaskPosition { row: usize, col: usize, size: usize },
    #[error("washout of {washout} steps leaves no samples out of {len}")]
    WashoutTooLong { washout: usize, len: usize },
    #[error("readout weights have not been trained")]
    MissingReadout,
    #[error("ridge normal matrix is singular; use a regularization gamma > 0")]
    SingularNormalMatrix,
    #[error("ridge parameter must be finite and nonnegative, got {0}")]
    InvalidGamma(f64),
    #[error("spectral radius is zero; the reservoir cannot be rescaled")]
    ZeroSpectralRadius,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Largest `f64` strictly below one. `tanh` rounds to exactly `±1.0` for
/// arguments beyond about 19.06; states are kept inside the open interval.
const STATE_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn activation(v: f64) -> f64 {
    v.tanh().clamp(-STATE_BOUND, STATE_BOUND)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnConfig {
    /// Input dimension (Na).
    pub n_in: usize,
    /// Reservoir size (Nx).
    pub n_res: usize,
    /// Output dimension (Nb).
    pub n_out: usize,
    /// Sampling range of every `W_in` entry, bias column included.
    pub input_range: Interval,
    /// Sampling range of the unmasked `W_r` entries.
    pub res_range: Interval,
    /// Fraction of `W_r` positions that are connected, in `(0, 1]`.
    pub density: f64,
    /// Spectral radius the baseline rescales to; `None` skips rescaling.
    pub target_rho: Option<f64>,
    pub ridge_gamma: f64,
    pub washout: usize,
}

impl EsnConfig {
    pub fn validate(&self) -> Result<(), EsnError> {
        let fail = |msg: String| Err(EsnError::Config(msg));
        if self.n_in == 0 || self.n_res == 0 || self.n_out == 0 {
            return fail(format!(
                "dimensions must be positive (n_in={}, n_res={}, n_out={})",
                self.n_in, self.n_res, self.n_out
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return fail(format!("density must lie in (0, 1], got {}", self.density));
        }
        if !(self.ridge_gamma >= 0.0 && self.ridge_gamma.is_finite()) {
            return fail(format!(
                "ridge_gamma must be finite and nonnegative, got {}",
                self.ridge_gamma
            ));
        }
        if let Some(rho) = self.target_rho {
            if !(rho > 0.0 && rho.is_finite()) {
                return fail(format!("target_rho must be positive, got {rho}"));
            }
        }
        Ok(())
    }

    /// Number of connected reservoir positions, `floor(density * Nx^2)`.
    pub fn connection_count(&self) -> usize {
        let total = self.n_res * self.n_res;
        // The epsilon absorbs products such as 0.3 * 2500 landing a hair under an integer.
        ((self.density * total as f64) + 1e-9).floor().min(total as f64) as usize
    }
}

/// Set of reservoir positions allowed to carry a nonzero weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReservoirMask {
    size: usize,
    positions: Vec<(usize, usize)>,
    active: Vec<bool>,
}

impl ReservoirMask {
    /// Every position connected.
    pub fn full(size: usize) -> Self {
        let positions = (0..size)
            .flat_map(|r| (0..size).map(move |c| (r, c)))
            .collect();
        Self {
            size,
            positions,
            active: vec![true; size * size],
        }
    }

    pub fn from_positions(
        size: usize,
        positions: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, EsnError> {
        let mut active = vec![false; size * size];
        let mut list = Vec::new();
        for (row, col) in positions {
            if row >= size || col >= size || active[row * size + col] {
                return Err(EsnError::MaskPosition { row, col, size });
            }
            active[row * size + col] = true;
            list.push((row, col));
        }
        list.sort_unstable();
        Ok(Self {
            size,
            positions: list,
            active,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Connected positions in row-major order.
    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_active(&self, row: usize, col: usize) -> bool {
        row < self.size && col < self.size && self.active[row * self.size + col]
    }
}

/// Input, reservoir and (once trained) readout weights of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct EsnWeights {
    w_in: DMatrix<f64>,
    w_res: DMatrix<f64>,
    mask: ReservoirMask,
    w_out: Option<DMatrix<f64>>,
}

impl EsnWeights {
    /// `w_in` is `Nx x (Na+1)` with the bias in column 0; `w_res` is `Nx x Nx`
    /// and must be zero everywhere outside `mask`.
    pub fn new(
        w_in: DMatrix<f64>,
        w_res: DMatrix<f64>,
        mask: ReservoirMask,
    ) -> Result<Self, EsnError> {
        if w_res.nrows() != w_res.ncols() {
            return Err(EsnError::NotSquare {
                rows: w_res.nrows(),
                cols: w_res.ncols(),
            });
        }
        let nx = w_res.nrows();
        if w_in.nrows() != nx {
            return Err(EsnError::Dimension {
                what: "input weight rows",
                expected: nx,
                got: w_in.nrows(),
            });
        }
        if w_in.ncols() < 2 {
            return Err(EsnError::Dimension {
                what: "input weight columns (bias plus at least one input)",
                expected: 2,
                got: w_in.ncols(),
            });
        }
        if mask.size() != nx {
            return Err(EsnError::Dimension {
                what: "mask size",
                expected: nx,
                got: mask.size(),
            });
        }
        for row in 0..nx {
            for col in 0..nx {
                if !mask.is_active(row, col) && w_res[(row, col)] != 0.0 {
                    return Err(EsnError::MaskViolation { row, col });
                }
            }
        }
        Ok(Self {
            w_in,
            w_res,
            mask,
            w_out: None,
        })
    }

    /// Fully connected reservoir.
    pub fn dense(w_in: DMatrix<f64>, w_res: DMatrix<f64>) -> Result<Self, EsnError> {
        let mask = ReservoirMask::full(w_res.nrows());
        Self::new(w_in, w_res, mask)
    }

    /// Attach readout weights of shape `Nb x (1 + Na + Nx)`.
    pub fn with_readout(mut self, w_out: DMatrix<f64>) -> Result<Self, EsnError> {
        let expected = 1 + self.n_in() + self.n_res();
        if w_out.ncols() != expected {
            return Err(EsnError::Dimension {
                what: "readout columns",
                expected,
                got: w_out.ncols(),
            });
        }
        if w_out.nrows() == 0 {
            return Err(EsnError::Dimension {
                what: "readout rows",
                expected: 1,
                got: 0,
            });
        }
        self.w_out = Some(w_out);
        Ok(self)
    }

    pub fn without_readout(mut self) -> Self {
        self.w_out = None;
        self
    }

    pub fn n_in(&self) -> usize {
        self.w_in.ncols() - 1
    }

    pub fn n_res(&self) -> usize {
        self.w_res.nrows()
    }

    pub fn n_out(&self) -> Option<usize> {
        self.w_out.as_ref().map(|w| w.nrows())
    }

    pub fn w_in(&self) -> &DMatrix<f64> {
        &self.w_in
    }

    pub fn w_res(&self) -> &DMatrix<f64> {
        &self.w_res
    }

    pub fn mask(&self) -> &ReservoirMask {
        &self.mask
    }

    pub fn w_out(&self) -> Option<&DMatrix<f64>> {
        self.w_out.as_ref()
    }

    /// Multiply every reservoir weight by `factor`; the mask is untouched.
    pub fn scale_reservoir(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.w_res *= factor;
        out
    }

    /// Overwrite one connected reservoir entry.
    pub(crate) fn set_reservoir(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(self.mask.is_active(row, col));
        self.w_res[(row, col)] = value;
    }

    /// One application of the state equation.
    pub fn update_state(
        &self,
        prev: &ReservoirState,
        input: &[f64],
    ) -> Result<ReservoirState, EsnError> {
        self.check_input(input.len())?;
        if prev.len() != self.n_res() {
            return Err(EsnError::Dimension {
                what: "reservoir state",
                expected: self.n_res(),
                got: prev.len(),
            });
        }
        let prop = Propagator::new(self);
        let mut next = vec![0.0; self.n_res()];
        prop.step(prev.as_slice(), input, &mut next);
        Ok(ReservoirState(DVector::from_vec(next)))
    }

    /// Linear readout of `[1, a(t), x(t)]`.
    pub fn readout(&self, state: &ReservoirState, input: &[f64]) -> Result<DVector<f64>, EsnError> {
        let w_out = self.w_out.as_ref().ok_or(EsnError::MissingReadout)?;
        self.check_input(input.len())?;
        if state.len() != self.n_res() {
            return Err(EsnError::Dimension {
                what: "reservoir state",
                expected: self.n_res(),
                got: state.len(),
            });
        }
        let na = self.n_in();
        Ok(DVector::from_fn(w_out.nrows(), |m, _| {
            let mut acc = w_out[(m, 0)];
            for (i, a) in input.iter().enumerate() {
                acc += w_out[(m, 1 + i)] * a;
            }
            for (i, x) in state.as_slice().iter().enumerate() {
                acc += w_out[(m, 1 + na + i)] * x;
            }
            acc
        }))
    }

    fn check_input(&self, len: usize) -> Result<(), EsnError> {
        if len != self.n_in() {
            return Err(EsnError::Dimension {
                what: "input vector",
                expected: self.n_in(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Reservoir activation vector `x(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState(DVector<f64>);

impl ReservoirState {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Input/target pairs `(a(t), b(t))` for `t = 1..T`, row `t` holding step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSequence {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    washout: usize,
}

impl SupervisedSequence {
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>, washout: usize) -> Result<Self, EsnError> {
        if inputs.nrows() != targets.nrows() {
            return Err(EsnError::Dimension {
                what: "target rows",
                expected: inputs.nrows(),
                got: targets.nrows(),
            });
        }
        if washout >= inputs.nrows() {
            return Err(EsnError::WashoutTooLong {
                washout,
                len: inputs.nrows(),
            });
        }
        Ok(Self {
            inputs,
            targets,
            washout,
        })
    }

    /// Scalar input and scalar target per step.
    pub fn from_scalars(inputs: &[f64], targets: &[f64], washout: usize) -> Result<Self, EsnError> {
        Self::new(
            DMatrix::from_column_slice(inputs.len(), 1, inputs),
            DMatrix::from_column_slice(targets.len(), 1, targets),
            washout,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn n_in(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.targets.ncols()
    }
}

/// Reservoir states retained after the washout, row-aligned with the
/// inputs and targets that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

impl Harvest {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Compressed-row view of the reservoir used by the inner loop.
struct Propagator<'a> {
    w_in: &'a DMatrix<f64>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl<'a> Propagator<'a> {
    fn new(weights: &'a EsnWeights) -> Self {
        let nx = weights.n_res();
        let mut row_start = Vec::with_capacity(nx + 1);
        let mut cols = Vec::with_capacity(weights.mask.len());
        let mut vals = Vec::with_capacity(weights.mask.len());
        row_start.push(0);
        let mut positions = weights.mask.positions().iter().peekable();
        for row in 0..nx {
            while let Some(&&(r, c)) = positions.peek() {
                if r != row {
                    break;
                }
                cols.push(c);
                vals.push(weights.w_res[(r, c)]);
                positions.next();
            }
            row_start.push(cols.len());
        }
        Self {
            w_in: &weights.w_in,
            row_start,
            cols,
            vals,
        }
    }

    fn step(&self, prev: &[f64], input: &[f64], out: &mut [f64]) {
        for (m, slot) in out.iter_mut().enumerate() {
            let mut acc = self.w_in[(m, 0)];
            for (i, a) in input.iter().enumerate() {
                acc += self.w_in[(m, i + 1)] * a;
            }
            let range = self.row_start[m]..self.row_start[m + 1];
            *slot = activation(acc + sparse_dot(&self.vals[range.clone()], &self.cols[range], prev));
        }
    }
}

/// Four independent partial sums: a single accumulator leaves the loop
/// bound by floating-point add latency.
fn sparse_dot(vals: &[f64], cols: &[usize], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut v4 = vals.chunks_exact(4);
    let mut c4 = cols.chunks_exact(4);
    for (v, c) in (&mut v4).zip(&mut c4) {
        for lane in 0..4 {
            acc[lane] += v[lane] * x[c[lane]];
        }
    }
    let mut tail = 0.0;
    for (v, &c) in v4.remainder().iter().zip(c4.remainder()) {
        tail += v * x[c];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Draw a fresh network: uniform `W_in` (bias column included) and a
/// uniformly placed set of `floor(density * Nx^2)` uniform reservoir weights.
pub fn init_weights(config: &EsnConfig, seed: u64) -> Result<EsnWeights, EsnError> {
    config.validate()?;
    let mut rng = seeded_rng(seed);
    let nx = config.n_res;
    let na = config.n_in;

    let mut w_in = DMatrix::zeros(nx, na + 1);
    for m in 0..nx {
        for i in 0..=na {
            w_in[(m, i)] = config.input_range.sample(&mut rng);
        }
    }

    let count = config.connection_count();
    let picked = index::sample(&mut rng, nx * nx, count);
    let mask = ReservoirMask::from_positions(nx, picked.iter().map(|p| (p / nx, p % nx)))?;
    let mut w_res = DMatrix::zeros(nx, nx);
    for &(r, c) in mask.positions() {
        w_res[(r, c)] = config.res_range.sample(&mut rng);
    }
    EsnWeights::new(w_in, w_res, mask)
}

/// Drive the reservoir through `seq` from `initial` (zero state when `None`)
/// and keep the states after the washout.
pub fn run_reservoir(
    weights: &EsnWeights,
    seq: &SupervisedSequence,
    initial: Option<&ReservoirState>,
) -> Result<Harvest, EsnError> {
    let nx = weights.n_res();
    weights.check_input(seq.n_in())?;
    let mut state = match initial {
        Some(s) if s.len() != nx => {
            return Err(EsnError::Dimension {
                what: "initial state",
                expected: nx,
                got: s.len(),
            })
        }
        Some(s) => s.as_slice().to_vec(),
        None => vec![0.0; nx],
    };
    let total = seq.len();
    let washout = seq.washout();
    if washout >= total {
        return Err(EsnError::WashoutTooLong { washout, len: total });
    }

    let prop = Propagator::new(weights);
    let kept = total - washout;
    let mut states = DMatrix::zeros(kept, nx);
    let mut next = vec![0.0; nx];
    let mut input = vec![0.0; seq.n_in()];
    for t in 0..total {
        for (i, slot) in input.iter_mut().enumerate() {
            *slot = seq.inputs[(t, i)];
        }
        prop.step(&state, &input, &mut next);
        std::mem::swap(&mut state, &mut next);
        if t >= washout {
            for (m, x) in state.iter().enumerate() {
                states[(t - washout, m)] = *x;
            }
        }
    }
    Ok(Harvest {
        states,
        inputs: seq.inputs.rows(washout, kept).into_owned(),
        targets: seq.targets.rows(washout, kept).into_owned(),
    })
}

/// Readout outputs for every retained step of a harvest, one row per step.
pub fn predict(weights: &EsnWeights, harvest: &Harvest) -> Result<DMatrix<f64>, EsnError> {
    let w_out = weights.w_out.as_ref().ok_or(EsnError::MissingReadout)?;
    let design = ridge::design_matrix(&harvest.states, &harvest.inputs)?;
    if design.ncols() != w_out.ncols() {
        return Err(EsnError::Dimension {
            what: "readout columns",
            expected: design.ncols(),
            got: w_out.ncols(),
        });
    }
    Ok(design * w_out.transpose())
}

fn harvest_mse(weights: &EsnWeights, harvest: &Harvest) -> Result<f64, EsnError> {
    let predictions = predict(weights, harvest)?;
    if predictions.ncols() != harvest.targets.ncols() {
        return Err(EsnError::Dimension {
            what: "readout rows",
            expected: harvest.targets.ncols(),
            got: predictions.ncols(),
        });
    }
    Ok(mean_squared_error(&predictions, &harvest.targets))
}

pub(crate) fn mean_squared_error(predictions: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64 {
    let n = predictions.len();
    let sum: f64 = predictions
        .iter()
        .zip(targets.iter())
        .map(|(y, b)| (y - b) * (y - b))
        .sum();
    sum / n as f64
}

/// Mean over retained steps and output dimensions of the squared error.
pub fn evaluate_mse(weights: &EsnWeights, seq: &SupervisedSequence) -> Result<f64, EsnError> {
    let harvest = run_reservoir(weights, seq, None)?;
    harvest_mse(weights, &harvest)
}

/// Ridge-fit the readout on `seq` and return the trained network with its
/// training MSE. The reservoir is run once for both.
pub fn fit_readout(
    weights: &EsnWeights,
    seq: &SupervisedSequence,
    gamma: f64,
) -> Result<(EsnWeights, f64), EsnError> {
    let harvest = run_reservoir(weights, seq, None)?;
    let w_out = ridge::train_readout(&harvest.states, &harvest.inputs, &harvest.targets, gamma)?;
    let trained = weights.clone().with_readout(w_out)?;
    let mse = harvest_mse(&trained, &harvest)?;
    Ok((trained, mse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(nx: usize, density: f64) -> EsnConfig {
        EsnConfig {
            n_in: 1,
            n_res: nx,
            n_out: 1,
            input_range: Interval::symmetric(0.8).unwrap(),
            res_range: Interval::symmetric(0.2).unwrap(),
            density,
            target_rho: Some(0.9),
            ridge_gamma: 1e-3,
            washout: 0,
        }
    }

    fn scalar_net(w_in: [f64; 2], w_res: f64) -> EsnWeights {
        EsnWeights::dense(
            DMatrix::from_row_slice(1, 2, &w_in),
            DMatrix::from_element(1, 1, w_res),
        )
        .unwrap()
    }

    #[test]
    fn full_density_fills_reservoir() {
        let w = init_weights(&config(3, 1.0), 1).unwrap();
        assert_eq!(w.mask().len(), 9);
        assert_eq!(w.w_res().iter().filter(|v| **v != 0.0).count(), 9);
        assert!(w.w_out().is_none());
    }

    #[test]
    fn sparse_mask_has_exact_count() {
        let cfg = config(50, 0.3);
        assert_eq!(cfg.connection_count(), 750);
        let w = init_weights(&cfg, 9).unwrap();
        assert_eq!(w.mask().len(), 750);
        for r in 0..50 {
            for c in 0..50 {
                if !w.mask().is_active(r, c) {
                    assert_eq!(w.w_res()[(r, c)], 0.0);
                } else {
                    assert!(cfg.res_range.contains(w.w_res()[(r, c)]));
                }
            }
        }
        assert!(w.w_in().iter().all(|v| cfg.input_range.contains(*v)));
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = config(20, 0.3);
        assert_eq!(init_weights(&cfg, 4).unwrap(), init_weights(&cfg, 4).unwrap());
        assert_ne!(init_weights(&cfg, 4).unwrap(), init_weights(&cfg, 5).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = config(5, 0.0);
        assert!(matches!(init_weights(&cfg, 0), Err(EsnError::Config(_))));
        cfg.density = 1.5;
        assert!(cfg.validate().is_err());
        cfg.density = 0.5;
        cfg.ridge_gamma = -1.0;
        assert!(cfg.validate().is_err());
        cfg.ridge_gamma = 0.0;
        cfg.n_in = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn masked_entries_must_be_zero() {
        let mask = ReservoirMask::from_positions(2, [(0, 1)]).unwrap();
        let w_res = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, 0.1, 0.0]);
        let err = EsnWeights::new(DMatrix::zeros(2, 2), w_res, mask).unwrap_err();
        assert_eq!(err, EsnError::MaskViolation { row: 1, col: 0 });
        assert!(ReservoirMask::from_positions(2, [(0, 1), (0, 1)]).is_err());
        assert!(ReservoirMask::from_positions(2, [(2, 0)]).is_err());
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = EsnWeights::dense(DMatrix::zeros(4, 3), DMatrix::zeros(4, 4)).unwrap();
        let x = w
            .update_state(&ReservoirState::from_vec(vec![0.5, -0.2, 0.9, 0.1]), &[3.0, -7.0])
            .unwrap();
        assert!(x.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_state_update() {
        let w = scalar_net([0.0, 1.0], 0.0);
        let x = w.update_state(&ReservoirState::zeros(1), &[0.5]).unwrap();
        assert_abs_diff_eq!(x.as_slice()[0], 0.5f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(x.as_slice()[0], 0.462117, epsilon = 1e-6);
    }

    #[test]
    fn saturated_state_stays_open_interval() {
        let w = EsnWeights::dense(
            DMatrix::from_row_slice(2, 2, &[1e6, 1e6, -1e6, -1e6]),
            DMatrix::from_element(2, 2, 1e9),
        )
        .unwrap();
        let x = w
            .update_state(&ReservoirState::from_vec(vec![0.9, -0.9]), &[1e12])
            .unwrap();
        assert!(x.as_slice().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn dimension_errors() {
        let w = scalar_net([0.0, 1.0], 0.0);
        assert!(matches!(
            w.update_state(&ReservoirState::zeros(1), &[0.5, 0.2]),
            Err(EsnError::Dimension { .. })
        ));
        assert!(matches!(
            w.update_state(&ReservoirState::zeros(2), &[0.5]),
            Err(EsnError::Dimension { .. })
        ));
        assert!(matches!(
            w.readout(&ReservoirState::zeros(1), &[0.5]),
            Err(EsnError::MissingReadout)
        ));
    }

    #[test]
    fn washout_must_leave_samples() {
        let err = SupervisedSequence::from_scalars(&[1.0; 5], &[1.0; 5], 5).unwrap_err();
        assert_eq!(err, EsnError::WashoutTooLong { washout: 5, len: 5 });
        assert!(SupervisedSequence::from_scalars(&[1.0; 5], &[1.0; 4], 0).is_err());
    }

    #[test]
    fn zero_network_harvests_zero_states() {
        let w = EsnWeights::dense(DMatrix::zeros(3, 2), DMatrix::zeros(3, 3)).unwrap();
        let seq = SupervisedSequence::from_scalars(&[0.3, -1.0, 2.0, 5.0], &[1.0, 2.0, 3.0, 4.0], 1)
            .unwrap();
        let h = run_reservoir(&w, &seq, None).unwrap();
        assert_eq!(h.len(), 3);
        assert!(h.states.iter().all(|v| *v == 0.0));
        assert_eq!(h.inputs.as_slice(), &[-1.0, 2.0, 5.0]);
        assert_eq!(h.targets.as_slice(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn two_step_unrolling() {
        let (b, wi, wr) = (0.1, 0.7, 0.5);
        let w = scalar_net([b, wi], wr);
        let seq = SupervisedSequence::from_scalars(&[0.4, -0.3], &[0.0, 0.0], 0).unwrap();
        let h = run_reservoir(&w, &seq, None).unwrap();
        let x1 = (b + wi * 0.4 + wr * 0.0f64).tanh();
        let x2 = (b + wi * -0.3 + wr * x1).tanh();
        assert_abs_diff_eq!(h.states[(0, 0)], x1, epsilon = 1e-15);
        assert_abs_diff_eq!(h.states[(1, 0)], x2, epsilon = 1e-15);

        let start = ReservoirState::from_vec(vec![0.6]);
        let h = run_reservoir(&w, &seq, Some(&start)).unwrap();
        let y1 = (b + wi * 0.4 + wr * 0.6).tanh();
        assert_abs_diff_eq!(h.states[(0, 0)], y1, epsilon = 1e-15);
    }

    #[test]
    fn readout_examples() {
        let w = scalar_net([0.0, 1.0], 0.0);
        let state = ReservoirState::from_vec(vec![0.25]);

        let zero = w.clone().with_readout(DMatrix::zeros(1, 3)).unwrap();
        assert_eq!(zero.readout(&state, &[0.5]).unwrap()[0], 0.0);

        let bias = w.clone().with_readout(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(bias.readout(&state, &[0.5]).unwrap()[0], 1.0);
        assert_eq!(bias.readout(&ReservoirState::from_vec(vec![-0.9]), &[7.0]).unwrap()[0], 1.0);

        let lin = w.with_readout(DMatrix::from_row_slice(1, 3, &[0.1, 2.0, -1.0])).unwrap();
        assert_abs_diff_eq!(lin.readout(&state, &[0.5]).unwrap()[0], 0.85, epsilon = 1e-15);
    }

    #[test]
    fn readout_shape_is_checked() {
        let w = scalar_net([0.0, 1.0], 0.0);
        assert!(w.with_readout(DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn mse_of_perfect_and_constant_predictions() {
        let w = EsnWeights::dense(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let seq = SupervisedSequence::from_scalars(&[1.0, 2.0, 3.0, 4.0], &[0.5; 4], 1).unwrap();
        let zero_out = w.clone().with_readout(DMatrix::zeros(1, 4)).unwrap();
        assert_eq!(evaluate_mse(&zero_out, &seq).unwrap(), 0.25);
        let exact = w.with_readout(DMatrix::from_row_slice(1, 4, &[0.5, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(evaluate_mse(&exact, &seq).unwrap(), 0.0);
    }

    #[test]
    fn mse_matches_stepwise_loop() {
        let mut cfg = config(12, 0.5);
        cfg.n_in = 2;
        cfg.n_out = 2;
        let w = init_weights(&cfg, 21).unwrap();
        let mut rng = seeded_rng(5);
        let t = 40;
        let inputs = DMatrix::from_fn(t, 2, |_, _| Interval::symmetric(1.0).unwrap().sample(&mut rng));
        let targets = DMatrix::from_fn(t, 2, |_, _| Interval::symmetric(1.0).unwrap().sample(&mut rng));
        let seq = SupervisedSequence::new(inputs.clone(), targets.clone(), 7).unwrap();
        let w_out = DMatrix::from_fn(2, 1 + 2 + 12, |_, _| Interval::symmetric(0.5).unwrap().sample(&mut rng));
        let w = w.with_readout(w_out).unwrap();

        let mut state = ReservoirState::zeros(12);
        let mut sum = 0.0;
        let mut count = 0usize;
        for step in 0..t {
            let a = [inputs[(step, 0)], inputs[(step, 1)]];
            state = w.update_state(&state, &a).unwrap();
            if step >= 7 {
                let y = w.readout(&state, &a).unwrap();
                for m in 0..2 {
                    sum += (y[m] - targets[(step, m)]).powi(2);
                    count += 1;
                }
            }
        }
        assert_abs_diff_eq!(evaluate_mse(&w, &seq).unwrap(), sum / count as f64, epsilon = 1e-12);
    }

    #[test]
    fn fit_readout_reports_training_mse() {
        let cfg = config(30, 0.3);
        let w = init_weights(&cfg, 3).unwrap();
        let input: Vec<f64> = (0..200).map(|t| (t as f64 * 0.3).sin()).collect();
        let target: Vec<f64> = (0..200).map(|t| (t as f64 * 0.3 + 0.3).sin()).collect();
        let seq = SupervisedSequence::from_scalars(&input, &target, 20).unwrap();
        let (trained, mse) = fit_readout(&w, &seq, 1e-6).unwrap();
        assert_eq!(evaluate_mse(&trained, &seq).unwrap(), mse);
        assert!(mse < 1e-3, "mse {mse}");
    }
}
