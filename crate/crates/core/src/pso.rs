//! Global-best particle swarm minimizer.
//!
//! Each epoch moves every particle with
//!
//! ```text
//! v <- inertia * v + d1 * (p_i - x) + d2 * (p* - x)
//! x <- x + v
//! ```
//!
//! where `d1`, `d2` are drawn per coordinate from `U[0, accel_personal]` and
//! `U[0, accel_global]`. All draws of an epoch happen sequentially before any
//! fitness is evaluated, so evaluation may run in parallel without changing
//! the result. Personal bests are updated first, then the global best, and a
//! best is only replaced on strict improvement.

use rayon::prelude::*;
use thiserror::Error;

use crate::interval::Interval;
use crate::seed::{seeded_rng, SeedRng};

pub const DEFAULT_INERTIA: f64 = 0.7298;
pub const DEFAULT_ACCELERATION: f64 = 1.49618;

#[derive(Debug, Error, PartialEq)]
pub enum PsoError {
    #[error("invalid swarm configuration: {0}")]
    Config(String),
    #[error("position has {got} coordinates, swarm dimension is {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub dim: usize,
    /// Momentum weight, in `(0, 1)`.
    pub inertia: f64,
    /// Upper bound of the personal-attraction coefficient draws.
    pub accel_personal: f64,
    /// Upper bound of the global-attraction coefficient draws.
    pub accel_global: f64,
    pub init_range: Interval,
    pub max_epochs: usize,
    pub seed: u64,
    pub velocity_clamp: Option<f64>,
}

impl PsoConfig {
    /// Standard coefficients, no velocity clamp.
    pub fn new(n_particles: usize, dim: usize, init_range: Interval, max_epochs: usize, seed: u64) -> Self {
        Self {
            n_particles,
            dim,
            inertia: DEFAULT_INERTIA,
            accel_personal: DEFAULT_ACCELERATION,
            accel_global: DEFAULT_ACCELERATION,
            init_range,
            max_epochs,
            seed,
            velocity_clamp: None,
        }
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        let fail = |msg: String| Err(PsoError::Config(msg));
        if self.n_particles == 0 || self.dim == 0 {
            return fail(format!(
                "need at least one particle and one dimension (n_particles={}, dim={})",
                self.n_particles, self.dim
            ));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return fail(format!("inertia must lie in (0, 1), got {}", self.inertia));
        }
        for (name, v) in [("accel_personal", self.accel_personal), ("accel_global", self.accel_global)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if let Some(v_max) = self.velocity_clamp {
            if !(v_max > 0.0) {
                return fail(format!("velocity_clamp must be positive, got {v_max}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Fitness of `position` as last evaluated.
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best_position: Vec<f64>,
    pub global_best_fitness: f64,
    pub epoch: usize,
}

/// Source of the per-coordinate attraction coefficients.
pub trait AccelerationDraw {
    /// Returns `(d1, d2)` for one coordinate of one particle.
    fn draw(&mut self, accel_personal: f64, accel_global: f64) -> (f64, f64);
}

/// Uniform draws on `[0, accel]`.
pub struct UniformDraw<'a>(pub &'a mut SeedRng);

impl AccelerationDraw for UniformDraw<'_> {
    fn draw(&mut self, accel_personal: f64, accel_global: f64) -> (f64, f64) {
        use rand::Rng;
        let d1 = accel_personal * self.0.random::<f64>();
        let d2 = accel_global * self.0.random::<f64>();
        (d1, d2)
    }
}

/// Fixed coefficients, ignoring the configured bounds.
#[derive(Debug, Clone, Copy)]
pub struct FixedDraw {
    pub personal: f64,
    pub global: f64,
}

impl AccelerationDraw for FixedDraw {
    fn draw(&mut self, _: f64, _: f64) -> (f64, f64) {
        (self.personal, self.global)
    }
}

fn sanitize(f: f64) -> f64 {
    if f.is_finite() {
        f
    } else {
        f64::INFINITY
    }
}

fn evaluate_all<F>(positions: &[&[f64]], fitness: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    positions.par_iter().map(|p| sanitize(fitness(p))).collect()
}

/// Lowest-index particle with the smallest personal best.
fn best_particle(particles: &[Particle]) -> usize {
    let mut best = 0;
    for (i, p) in particles.iter().enumerate().skip(1) {
        if p.best_fitness < particles[best].best_fitness {
            best = i;
        }
    }
    best
}

impl Swarm {
    /// Uniform positions on `init_range`, zero velocities, one evaluation each.
    pub fn init<F>(config: &PsoConfig, fitness: &F, rng: &mut SeedRng) -> Result<Self, PsoError>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        config.validate()?;
        let positions: Vec<Vec<f64>> = (0..config.n_particles)
            .map(|_| (0..config.dim).map(|_| config.init_range.sample(rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = positions.iter().map(Vec::as_slice).collect();
        let values = evaluate_all(&refs, fitness);
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(values)
            .map(|(position, f)| Particle {
                velocity: vec![0.0; config.dim],
                best_position: position.clone(),
                best_fitness: f,
                fitness: f,
                position,
            })
            .collect();
        let best = best_particle(&particles);
        Ok(Self {
            global_best_position: particles[best].best_position.clone(),
            global_best_fitness: particles[best].best_fitness,
            particles,
            epoch: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.global_best_position.len()
    }

    /// One epoch: move all particles, evaluate, update personal then global bests.
    pub fn step<F, D>(&mut self, config: &PsoConfig, fitness: &F, draws: &mut D)
    where
        F: Fn(&[f64]) -> f64 + Sync,
        D: AccelerationDraw,
    {
        let global = &self.global_best_position;
        for particle in &mut self.particles {
            for j in 0..particle.position.len() {
                let (d1, d2) = draws.draw(config.accel_personal, config.accel_global);
                let x = particle.position[j];
                let mut v = config.inertia * particle.velocity[j]
                    + d1 * (particle.best_position[j] - x)
                    + d2 * (global[j] - x);
                if let Some(v_max) = config.velocity_clamp {
                    v = v.clamp(-v_max, v_max);
                }
                particle.velocity[j] = v;
                particle.position[j] = x + v;
            }
        }

        let refs: Vec<&[f64]> = self.particles.iter().map(|p| p.position.as_slice()).collect();
        let values = evaluate_all(&refs, fitness);
        for (particle, f) in self.particles.iter_mut().zip(values) {
            particle.fitness = f;
            if f < particle.best_fitness {
                particle.best_fitness = f;
                particle.best_position.clone_from(&particle.position);
            }
        }
        let best = best_particle(&self.particles);
        if self.particles[best].best_fitness < self.global_best_fitness {
            self.global_best_fitness = self.particles[best].best_fitness;
            self.global_best_position
                .clone_from(&self.particles[best].best_position);
        }
        self.epoch += 1;
    }
}

/// Initial swarm drawn from `config.seed`.
pub fn init_swarm<F>(config: &PsoConfig, fitness: &F) -> Result<Swarm, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Swarm::init(config, fitness, &mut seeded_rng(config.seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after each epoch (`max_epochs` entries).
    pub trace: Vec<f64>,
    /// Fitness of every particle at initialization.
    pub initial_fitness: Vec<f64>,
    /// Global best at initialization, before any epoch.
    pub initial_best_fitness: f64,
}

/// Initialize a swarm and run `max_epochs` epochs.
pub fn optimize<F>(config: &PsoConfig, fitness: F) -> Result<PsoOutcome, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = seeded_rng(config.seed);
    let mut swarm = Swarm::init(config, &fitness, &mut rng)?;
    let initial_fitness = swarm.particles.iter().map(|p| p.fitness).collect();
    let initial_best_fitness = swarm.global_best_fitness;
    let mut trace = Vec::with_capacity(config.max_epochs);
    for _ in 0..config.max_epochs {
        swarm.step(config, &fitness, &mut UniformDraw(&mut rng));
        trace.push(swarm.global_best_fitness);
    }
    Ok(PsoOutcome {
        best_position: swarm.global_best_position,
        best_fitness: swarm.global_best_fitness,
        trace,
        initial_fitness,
        initial_best_fitness,
    })
}
