//! PSO-ESN: tune a random subset of reservoir weights with a particle swarm.
//!
//! A particle is the vector of values of the selected reservoir entries.
//! Its fitness is the training MSE of the network obtained by writing those
//! values into the reservoir and ridge-fitting the readout. No spectral
//! quantity is computed anywhere on this path.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::esn::{self, EsnConfig, EsnError, EsnWeights, SupervisedSequence};
use crate::pso::{self, PsoConfig, PsoError, PsoOutcome};
use crate::seed::{derive_seed, seeded_rng};

const SELECTION_STREAM: u64 = 0x5e1ec7;
const SWARM_STREAM: u64 = 0x5a4a;

#[derive(Debug, Error, PartialEq)]
pub enum HybridError {
    #[error(transparent)]
    Esn(#[from] EsnError),
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error("requested {requested} tuned weights but the reservoir has {available} connections")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("subset must contain at least one weight")]
    EmptySubset,
    #[error("subset fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("particle has {got} coordinates, selection has {expected}")]
    ParticleLength { expected: usize, got: usize },
    #[error("selection position ({row}, {col}) is not a reservoir connection")]
    InvalidPosition { row: usize, col: usize },
    #[error("swarm dimension {dim} does not match subset size {subset}")]
    DimensionMismatch { dim: usize, subset: usize },
}

/// How many reservoir weights the swarm tunes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsetSize {
    Count(usize),
    /// `floor(alpha * connections)` weights.
    Fraction(f64),
}

impl SubsetSize {
    pub fn resolve(self, available: usize) -> Result<usize, HybridError> {
        let m = match self {
            SubsetSize::Count(m) => m,
            SubsetSize::Fraction(alpha) => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(HybridError::InvalidFraction(alpha));
                }
                ((alpha * available as f64) + 1e-9).floor().min(available as f64) as usize
            }
        };
        if m == 0 {
            return Err(HybridError::EmptySubset);
        }
        if m > available {
            return Err(HybridError::SubsetTooLarge {
                requested: m,
                available,
            });
        }
        Ok(m)
    }
}

/// Ordered reservoir positions whose values form a particle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSelection {
    indices: Vec<(usize, usize)>,
}

impl WeightSelection {
    /// Explicit positions; each must be a distinct connection of `weights`.
    pub fn new(weights: &EsnWeights, indices: Vec<(usize, usize)>) -> Result<Self, HybridError> {
        if indices.is_empty() {
            return Err(HybridError::EmptySubset);
        }
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        for &(row, col) in &indices {
            if !weights.mask().is_active(row, col) || !seen.insert((row, col)) {
                return Err(HybridError::InvalidPosition { row, col });
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sample positions uniformly without replacement among the connections of
/// `weights`. A single seeded shuffle is truncated, so for a fixed seed the
/// selection for a smaller size is a prefix of the one for a larger size.
pub fn select_subset(weights: &EsnWeights, size: SubsetSize, seed: u64) -> Result<WeightSelection, HybridError> {
    let available = weights.mask().positions();
    let m = size.resolve(available.len())?;
    let mut shuffled = available.to_vec();
    shuffled.shuffle(&mut seeded_rng(seed));
    shuffled.truncate(m);
    Ok(WeightSelection { indices: shuffled })
}

pub fn encode(weights: &EsnWeights, selection: &WeightSelection) -> Vec<f64> {
    selection
        .indices
        .iter()
        .map(|&(r, c)| weights.w_res()[(r, c)])
        .collect()
}

/// Copy of `weights` with the selected reservoir entries set to `values`.
pub fn decode(weights: &EsnWeights, selection: &WeightSelection, values: &[f64]) -> Result<EsnWeights, HybridError> {
    if values.len() != selection.len() {
        return Err(HybridError::ParticleLength {
            expected: selection.len(),
            got: values.len(),
        });
    }
    let mut out = weights.clone();
    for (&(r, c), &v) in selection.indices.iter().zip(values) {
        if !out.mask().is_active(r, c) {
            return Err(HybridError::InvalidPosition { row: r, col: c });
        }
        out.set_reservoir(r, c, v);
    }
    Ok(out)
}

/// Training MSE of the network carrying `values` in the selected entries,
/// with its readout ridge-fitted on `train`. Numerical failures (diverging
/// states, a singular ridge system) score `+inf`.
pub fn fitness_of_particle(
    base: &EsnWeights,
    selection: &WeightSelection,
    values: &[f64],
    train: &SupervisedSequence,
    gamma: f64,
) -> Result<f64, HybridError> {
    let candidate = decode(base, selection, values)?;
    if train.n_in() != candidate.n_in() {
        return Err(EsnError::Dimension {
            what: "training inputs",
            expected: candidate.n_in(),
            got: train.n_in(),
        }
        .into());
    }
    match esn::fit_readout(&candidate, train, gamma) {
        Ok((_, mse)) if mse.is_finite() => Ok(mse),
        Ok(_) | Err(EsnError::SingularNormalMatrix) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    /// `target_rho` is ignored: the hybrid never rescales.
    pub esn: EsnConfig,
    pub pso: PsoConfig,
    pub subset: SubsetSize,
    pub seed: u64,
}

impl HybridConfig {
    /// Fills the swarm dimension from the subset size, sets the particle
    /// initialization range to the reservoir range and derives the swarm seed.
    pub fn new(esn: EsnConfig, mut pso: PsoConfig, subset: SubsetSize, seed: u64) -> Result<Self, HybridError> {
        esn.validate()?;
        pso.dim = subset.resolve(esn.connection_count())?;
        pso.init_range = esn.res_range;
        pso.seed = derive_seed(seed, SWARM_STREAM);
        Ok(Self { esn, pso, subset, seed })
    }

    pub fn subset_len(&self) -> Result<usize, HybridError> {
        self.subset.resolve(self.esn.connection_count())
    }

    pub fn validate(&self) -> Result<(), HybridError> {
        self.esn.validate()?;
        self.pso.validate()?;
        let m = self.subset_len()?;
        if self.pso.dim != m {
            return Err(HybridError::DimensionMismatch {
                dim: self.pso.dim,
                subset: m,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HybridModel {
    /// Tuned reservoir with the final readout attached.
    pub weights: EsnWeights,
    /// Network as initialized, before any tuning.
    pub initial_weights: EsnWeights,
    pub selection: WeightSelection,
    pub outcome: PsoOutcome,
    pub train_mse: f64,
}

/// Random network, random subset, swarm search over the subset, final readout.
pub fn train_pso_esn(config: &HybridConfig, train: &SupervisedSequence) -> Result<HybridModel, HybridError> {
    config.validate()?;
    let initial = esn::init_weights(&config.esn, config.seed)?;
    let selection = select_subset(&initial, config.subset, derive_seed(config.seed, SELECTION_STREAM))?;
    // Surface shape errors once, before the swarm swallows them as +inf.
    fitness_of_particle(&initial, &selection, &encode(&initial, &selection), train, config.esn.ridge_gamma)?;

    let gamma = config.esn.ridge_gamma;
    let outcome = pso::optimize(&config.pso, |v: &[f64]| {
        fitness_of_particle(&initial, &selection, v, train, gamma).unwrap_or(f64::INFINITY)
    })?;
    let tuned = decode(&initial, &selection, &outcome.best_position)?;
    let (weights, train_mse) = esn::fit_readout(&tuned, train, gamma)?;
    Ok(HybridModel {
        weights,
        initial_weights: initial,
        selection,
        outcome,
        train_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::init_weights;
    use crate::Interval;
    use nalgebra::DMatrix;

    fn esn_config(nx: usize) -> EsnConfig {
        EsnConfig {
            n_in: 1,
            n_res: nx,
            n_out: 1,
            input_range: Interval::symmetric(0.5).unwrap(),
            res_range: Interval::symmetric(0.2).unwrap(),
            density: 0.3,
            target_rho: None,
            ridge_gamma: 1e-4,
            washout: 20,
        }
    }

    fn sine_task(len: usize, washout: usize) -> SupervisedSequence {
        let input: Vec<f64> = (0..len).map(|t| (t as f64 * 0.2).sin() * 0.5).collect();
        let target: Vec<f64> = (0..len).map(|t| (t as f64 * 0.2 - 0.6).sin().powi(2)).collect();
        SupervisedSequence::from_scalars(&input, &target, washout).unwrap()
    }

    #[test]
    fn full_fraction_selects_every_connection() {
        let w = init_weights(&esn_config(10), 1).unwrap();
        let sel = select_subset(&w, SubsetSize::Fraction(1.0), 3).unwrap();
        assert_eq!(sel.len(), w.mask().len());
        let mut got = sel.indices().to_vec();
        got.sort_unstable();
        assert_eq!(got, w.mask().positions());
    }

    #[test]
    fn selection_is_distinct_connected_and_seeded() {
        let w = init_weights(&esn_config(150), 2).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(30), 9).unwrap();
        assert_eq!(sel.len(), 30);
        let unique: std::collections::HashSet<_> = sel.indices().iter().collect();
        assert_eq!(unique.len(), 30);
        assert!(sel.indices().iter().all(|&(r, c)| w.mask().is_active(r, c)));
        assert_eq!(sel, select_subset(&w, SubsetSize::Count(30), 9).unwrap());
        let small = select_subset(&w, SubsetSize::Count(5), 9).unwrap();
        assert_eq!(small.indices(), &sel.indices()[..5]);
    }

    #[test]
    fn selection_errors() {
        let w = init_weights(&esn_config(4), 2).unwrap();
        let available = w.mask().len();
        assert_eq!(
            select_subset(&w, SubsetSize::Count(available + 1), 0).unwrap_err(),
            HybridError::SubsetTooLarge { requested: available + 1, available }
        );
        assert_eq!(select_subset(&w, SubsetSize::Count(0), 0).unwrap_err(), HybridError::EmptySubset);
        assert!(select_subset(&w, SubsetSize::Fraction(0.0), 0).is_err());
        assert!(select_subset(&w, SubsetSize::Fraction(1.5), 0).is_err());
    }

    #[test]
    fn encode_decode_roundtrips() {
        let w = init_weights(&esn_config(12), 5).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(7), 1).unwrap();
        assert_eq!(decode(&w, &sel, &encode(&w, &sel)).unwrap(), w);
        let v: Vec<f64> = (0..7).map(|i| i as f64 - 3.3).collect();
        assert_eq!(encode(&decode(&w, &sel, &v).unwrap(), &sel), v);
    }

    #[test]
    fn single_entry_encode_and_overwrite() {
        let w_res = DMatrix::from_row_slice(2, 2, &[0.17, -0.1, 0.05, 0.3]);
        let w = EsnWeights::dense(DMatrix::zeros(2, 2), w_res.clone()).unwrap();
        let sel = WeightSelection::new(&w, vec![(0, 0)]).unwrap();
        assert_eq!(encode(&w, &sel), vec![0.17]);

        let sel = WeightSelection::new(&w, vec![(1, 0)]).unwrap();
        let out = decode(&w, &sel, &[0.9]).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let expected = if (r, c) == (1, 0) { 0.9 } else { w_res[(r, c)] };
                assert_eq!(out.w_res()[(r, c)], expected);
            }
        }
    }

    #[test]
    fn zero_particle_zeroes_selected_only() {
        let w = init_weights(&esn_config(12), 6).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(10), 2).unwrap();
        let out = decode(&w, &sel, &[0.0; 10]).unwrap();
        for &(r, c) in w.mask().positions() {
            let expected = if sel.indices().contains(&(r, c)) { 0.0 } else { w.w_res()[(r, c)] };
            assert_eq!(out.w_res()[(r, c)], expected);
        }
        assert_eq!(out.mask(), w.mask());
    }

    #[test]
    fn decode_checks_length_and_positions() {
        let w = init_weights(&esn_config(6), 6).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(3), 2).unwrap();
        assert_eq!(
            decode(&w, &sel, &[1.0]).unwrap_err(),
            HybridError::ParticleLength { expected: 3, got: 1 }
        );
        let off = (0..6)
            .flat_map(|r| (0..6).map(move |c| (r, c)))
            .find(|&(r, c)| !w.mask().is_active(r, c))
            .unwrap();
        assert!(WeightSelection::new(&w, vec![off]).is_err());
        let dup = w.mask().positions()[0];
        assert!(WeightSelection::new(&w, vec![dup, dup]).is_err());
    }

    #[test]
    fn identity_particle_matches_baseline() {
        let cfg = esn_config(40);
        let w = init_weights(&cfg, 11).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(12), 4).unwrap();
        let train = sine_task(300, 20);
        let f = fitness_of_particle(&w, &sel, &encode(&w, &sel), &train, cfg.ridge_gamma).unwrap();
        let (trained, _) = esn::fit_readout(&w, &train, cfg.ridge_gamma).unwrap();
        let baseline = esn::evaluate_mse(&trained, &train).unwrap();
        assert!((f - baseline).abs() <= 1e-12);
        // Pure: same arguments, same value; base untouched.
        let again = fitness_of_particle(&w, &sel, &encode(&w, &sel), &train, cfg.ridge_gamma).unwrap();
        assert_eq!(f, again);
        assert_eq!(w, init_weights(&cfg, 11).unwrap());
    }

    #[test]
    fn zero_targets_give_zero_fitness() {
        let cfg = esn_config(20);
        let w = init_weights(&cfg, 1).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(4), 1).unwrap();
        let input: Vec<f64> = (0..120).map(|t| (t as f64).cos()).collect();
        let train = SupervisedSequence::from_scalars(&input, &[0.0; 120], 10).unwrap();
        let f = fitness_of_particle(&w, &sel, &encode(&w, &sel), &train, 1e-3).unwrap();
        assert!(f < 1e-20, "fitness {f}");
    }

    #[test]
    fn divergent_particle_scores_infinity() {
        let cfg = esn_config(10);
        let w = init_weights(&cfg, 1).unwrap();
        let sel = select_subset(&w, SubsetSize::Count(2), 1).unwrap();
        let train = sine_task(100, 10);
        let f = fitness_of_particle(&w, &sel, &[f64::NAN, 0.0], &train, 1e-3).unwrap();
        assert_eq!(f, f64::INFINITY);
    }

    fn hybrid(epochs: usize, m: usize, seed: u64) -> HybridConfig {
        let esn = esn_config(30);
        let pso = PsoConfig::new(6, 0, esn.res_range, epochs, 0);
        HybridConfig::new(esn, pso, SubsetSize::Count(m), seed).unwrap()
    }

    #[test]
    fn config_fills_swarm_dimension() {
        let cfg = hybrid(3, 8, 1);
        assert_eq!(cfg.pso.dim, 8);
        assert_eq!(cfg.pso.init_range, cfg.esn.res_range);
        let mut bad = cfg.clone();
        bad.pso.dim = 9;
        assert!(matches!(bad.validate(), Err(HybridError::DimensionMismatch { .. })));
    }

    #[test]
    fn training_preserves_untouched_weights_and_mask() {
        let cfg = hybrid(8, 10, 3);
        let train = sine_task(250, 20);
        let model = train_pso_esn(&cfg, &train).unwrap();
        assert_eq!(model.weights.mask(), model.initial_weights.mask());
        let initial = init_weights(&cfg.esn, cfg.seed).unwrap();
        assert_eq!(model.initial_weights, initial);
        for r in 0..30 {
            for c in 0..30 {
                if !model.selection.indices().contains(&(r, c)) {
                    assert_eq!(model.weights.w_res()[(r, c)], initial.w_res()[(r, c)]);
                }
            }
        }
        assert_eq!(encode(&model.weights, &model.selection), model.outcome.best_position);
        assert!(model.outcome.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(model.outcome.initial_fitness.iter().all(|f| model.train_mse <= *f));
        assert_eq!(model.train_mse, model.outcome.best_fitness);
    }

    #[test]
    fn zero_epochs_uses_best_initial_particle() {
        let cfg = hybrid(0, 5, 4);
        let train = sine_task(200, 20);
        let model = train_pso_esn(&cfg, &train).unwrap();
        let swarm = pso::init_swarm(&cfg.pso, &|v: &[f64]| {
            fitness_of_particle(&model.initial_weights, &model.selection, v, &train, cfg.esn.ridge_gamma).unwrap()
        })
        .unwrap();
        assert_eq!(encode(&model.weights, &model.selection), swarm.global_best_position);
        assert!(model.outcome.trace.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = hybrid(4, 6, 8);
        let train = sine_task(200, 20);
        let a = train_pso_esn(&cfg, &train).unwrap();
        let b = train_pso_esn(&cfg, &train).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.outcome, b.outcome);
    }
}
