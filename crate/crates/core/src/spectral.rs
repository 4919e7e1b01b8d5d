//! Spectral radius estimation and reservoir rescaling.
//!
//! Plain power iteration stalls when the dominant eigenvalue is one of a
//! complex-conjugate pair (the iterate keeps rotating inside the dominant
//! plane), which is the common case for random non-symmetric reservoirs.
//! Each iteration therefore takes the Ritz values of the two-dimensional
//! Krylov space `span{v, Wv}`: once `v` lies in the dominant invariant
//! subspace the 2x2 projection carries both members of the pair exactly,
//! and for a real dominant eigenvalue it reduces to the Rayleigh quotient.

use nalgebra::{DMatrix, DVector};

use crate::esn::{EsnError, EsnWeights};
use crate::interval::Interval;
use crate::seed::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// Relative change between successive estimates that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed of the random start vector.
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            seed: 0,
        }
    }
}

impl PowerIteration {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    /// False when the iteration budget ran out; `radius` is then the last estimate.
    pub converged: bool,
    pub iterations: usize,
}

fn largest_ritz_modulus(h: [[f64; 2]; 2]) -> f64 {
    let trace = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let half = trace / 2.0;
    let disc = half * half - det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        (half + root).abs().max((half - root).abs())
    } else {
        // Complex pair: |lambda|^2 = lambda * conj(lambda) = det.
        det.sqrt()
    }
}

pub fn spectral_radius(matrix: &DMatrix<f64>, params: &PowerIteration) -> Result<SpectralEstimate, EsnError> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(EsnError::NotSquare {
            rows: n,
            cols: matrix.ncols(),
        });
    }
    if n == 0 {
        return Ok(SpectralEstimate {
            radius: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let mut rng = seeded_rng(params.seed);
    let range = Interval::symmetric(1.0).expect("unit interval");
    let mut v = DVector::from_fn(n, |_, _| range.sample(&mut rng));
    let norm = v.norm();
    if norm == 0.0 {
        v.fill(1.0);
    }
    v /= v.norm();

    let mut previous = f64::NAN;
    let mut estimate = 0.0;
    for iteration in 1..=params.max_iterations {
        let w = matrix * &v;
        let w_norm = w.norm();
        if w_norm == 0.0 || !w_norm.is_finite() {
            // The iterate was annihilated: only a nilpotent part remained.
            let radius = if w_norm == 0.0 { 0.0 } else { f64::INFINITY };
            return Ok(SpectralEstimate {
                radius,
                converged: w_norm == 0.0,
                iterations: iteration,
            });
        }
        let rayleigh = v.dot(&w);
        let residual = &w - &v * rayleigh;
        let r_norm = residual.norm();
        estimate = if r_norm <= 1e-12 * w_norm {
            rayleigh.abs()
        } else {
            let q2 = residual / r_norm;
            let aq2 = matrix * &q2;
            largest_ritz_modulus([[rayleigh, v.dot(&aq2)], [q2.dot(&w), q2.dot(&aq2)]])
        };
        if (estimate - previous).abs() <= params.tolerance * estimate {
            return Ok(SpectralEstimate {
                radius: estimate,
                converged: true,
                iterations: iteration,
            });
        }
        previous = estimate;
        v = w / w_norm;
    }
    Ok(SpectralEstimate {
        radius: estimate,
        converged: false,
        iterations: params.max_iterations,
    })
}

/// Scale `W_r` so its estimated spectral radius becomes `target_rho`.
/// Only the reservoir matrix is rescaled; input weights are left alone.
pub fn rescale_reservoir(
    weights: &EsnWeights,
    target_rho: f64,
    params: &PowerIteration,
) -> Result<(EsnWeights, SpectralEstimate), EsnError> {
    if !(target_rho > 0.0 && target_rho.is_finite()) {
        return Err(EsnError::Config(format!("target_rho must be positive, got {target_rho}")));
    }
    let estimate = spectral_radius(weights.w_res(), params)?;
    if estimate.radius == 0.0 || !estimate.radius.is_finite() {
        return Err(EsnError::ZeroSpectralRadius);
    }
    Ok((weights.scale_reservoir(target_rho / estimate.radius), estimate))
}
