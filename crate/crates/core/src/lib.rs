//! Echo state networks and the PSO-ESN hybrid.
//!
//! The crate is split along the pieces of the method:
//!
//! * [`esn`] holds the canonical echo state network: random initialization,
//!   state propagation, ridge readout and MSE evaluation.
//! * [`spectral`] estimates the spectral radius of a reservoir matrix and
//!   rescales it (used by the baseline only).
//! * [`pso`] is a generic global-best particle swarm minimizer.
//! * [`hybrid`] tunes a random subset of reservoir weights with the swarm,
//!   refitting the readout for every candidate.
//! * [`data`] generates NARMA series, loads CSV series and builds
//!   one-step-ahead supervised tasks.

pub mod data;
pub mod esn;
pub mod hybrid;
mod interval;
pub mod pso;
pub mod ridge;
mod seed;
pub mod spectral;

pub use interval::{Interval, IntervalError};
pub use seed::{derive_seed, seeded_rng, SeedRng};
