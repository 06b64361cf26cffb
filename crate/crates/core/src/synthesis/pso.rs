//! Global-best particle swarm over a box-bounded continuous space.
//!
//! Random numbers for every particle are drawn by the iteration driver, in
//! particle order, before the fitness evaluations of that iteration run. The
//! evaluations themselves may run concurrently without affecting results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Stop after this many iterations without improvement of the global best.
    pub stagnation: usize,
    pub seed: u64,
    pub boundary: Boundary,
}

/// What happens to a particle that leaves the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Mirror the overshoot back inside and reverse the velocity component.
    #[default]
    Reflect,
    /// Stop on the wall and zero the velocity component.
    Absorb,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            iterations: 200,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            stagnation: 40,
            seed: 0,
            boundary: Boundary::Reflect,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(invalid(format!("swarm size must be >= 2, got {}", self.swarm_size)));
        }
        if self.iterations < 1 {
            return Err(invalid("iteration count must be >= 1"));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(invalid(format!("inertia must be in (0, 1), got {}", self.inertia)));
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) || !(self.cognitive.is_finite() && self.social.is_finite()) {
            return Err(invalid("acceleration coefficients must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    /// Best value after initialization (index 0) and after each iteration.
    pub trace: Vec<f64>,
    /// Best value among the initial particles.
    pub initial_best: f64,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_value: f64,
}

fn confine(boundary: Boundary, x: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    if *x <= hi && *x >= lo {
        return;
    }
    if boundary == Boundary::Absorb {
        *x = x.clamp(lo, hi);
        *v = 0.0;
        return;
    }
    if *x > hi {
        *x = hi - (*x - hi);
        *v = -*v;
    } else if *x < lo {
        *x = lo + (lo - *x);
        *v = -*v;
    }
    *x = x.clamp(lo, hi);
}

fn evaluate<F>(positions: &[&[f64]], fitness: &F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let values = positions
        .par_iter()
        .map(|p| fitness(p))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("fitness value {bad}")));
    }
    Ok(values)
}

/// Minimizes `fitness` over the box `bounds`.
pub fn minimize<F>(bounds: &[(f64, f64)], config: &OptimizerConfig, fitness: F) -> Result<SwarmOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    if bounds.is_empty() {
        return Err(invalid("swarm needs at least one dimension"));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite()) || lo > hi) {
        return Err(invalid("swarm bounds must be finite with lo <= hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { lo };

    let mut particles: Vec<Particle> = (0..config.swarm_size)
        .map(|_| {
            let position: Vec<f64> = bounds.iter().map(|&(lo, hi)| uniform(&mut rng, lo, hi)).collect();
            let velocity = bounds
                .iter()
                .zip(&position)
                .map(|(&(lo, hi), x)| (uniform(&mut rng, lo, hi) - x) / 2.0)
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_value: f64::INFINITY,
            }
        })
        .collect();

    let values = evaluate(&particles.iter().map(|p| p.position.as_slice()).collect::<Vec<_>>(), &fitness)?;
    for (p, v) in particles.iter_mut().zip(values) {
        p.best_value = v;
    }
    let mut best_idx = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_value < particles[best_idx].best_value {
            best_idx = i;
        }
    }
    let mut global_position = particles[best_idx].best_position.clone();
    let mut global_value = particles[best_idx].best_value;
    let initial_best = global_value;
    let mut trace = vec![global_value];
    let mut stale = 0;

    let dim = bounds.len();
    for _ in 0..config.iterations {
        // pre-draw (r1, r2) for every particle and dimension in a fixed order
        let draws: Vec<Vec<(f64, f64)>> = (0..particles.len())
            .map(|_| (0..dim).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect())
            .collect();

        for (particle, r) in particles.iter_mut().zip(&draws) {
            for d in 0..dim {
                let (lo, hi) = bounds[d];
                let vmax = hi - lo;
                let (r1, r2) = r[d];
                let x = particle.position[d];
                let mut v = config.inertia * particle.velocity[d]
                    + config.cognitive * r1 * (particle.best_position[d] - x)
                    + config.social * r2 * (global_position[d] - x);
                v = v.clamp(-vmax, vmax);
                let mut nx = x + v;
                confine(config.boundary, &mut nx, &mut v, lo, hi);
                particle.position[d] = nx;
                particle.velocity[d] = v;
            }
        }

        let values = evaluate(&particles.iter().map(|p| p.position.as_slice()).collect::<Vec<_>>(), &fitness)?;
        let mut improved = false;
        for (particle, v) in particles.iter_mut().zip(values) {
            if v < particle.best_value {
                particle.best_value = v;
                particle.best_position.clone_from(&particle.position);
            }
            if v < global_value {
                global_value = v;
                global_position.clone_from(&particle.position);
                improved = true;
            }
        }
        trace.push(global_value);
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if config.stagnation > 0 && stale >= config.stagnation {
                break;
            }
        }
    }

    Ok(SwarmOutcome {
        best_position: global_position,
        best_value: global_value,
        trace,
        initial_best,
    })
}
