//! Firefly optimization.
//!
//! Each firefly moves towards every brighter one by
//! `x += beta0 * exp(-gamma * r^2) * (x_j - x) + random_scale * range * U(-1, 1)`
//! (per gene), and a firefly with no brighter neighbour takes the random step
//! alone. Moves use the positions at the start of the iteration. Light
//! intensity starts at the roulette fitness of the initial swarm; after each
//! iteration it is that initial value plus `alpha_intensity` times the
//! current fitness.

use crate::error::Result;
use crate::rng::{self, Draw};

use super::{fitness_weights, Algorithm, Position, RunResult, SolveContext, SolverParams, Tracker};

/// `beta0 * exp(-gamma * d^2)` with `d` the Euclidean distance between positions.
pub fn attractiveness(a: &Position, b: &Position, beta0: f64, gamma: f64) -> f64 {
    beta0 * (-gamma * a.distance_squared(b)).exp()
}

fn random_step(ctx: &SolveContext<'_>, x: &mut Position, scale: f64, r: &mut rng::Rng) {
    for (i, g) in x.genes.iter_mut().enumerate() {
        let (lo, hi) = ctx.gene_bounds(i);
        *g += scale * (hi - lo) * r.uniform(-1.0, 1.0);
    }
}

pub fn ffo_solve(ctx: &SolveContext<'_>, params: &SolverParams, seed: u64) -> Result<RunResult> {
    params.validate(Algorithm::Ffo)?;
    let pop_size = params.population_for(Algorithm::Ffo);
    let p = &params.ffo;
    let inst = ctx.instance();
    let gamma = p.gamma.unwrap_or_else(|| {
        let (l, t) = (inst.horizon_days() as f64, inst.slots_per_day() as f64);
        1.0 / (l * l + t * t)
    });
    let mut tracker = Tracker::new();

    let mut swarm: Vec<Position> = (0..pop_size)
        .map(|k| Position::random(ctx, &mut rng::stream(seed, 0, k)))
        .collect();
    let objectives = tracker.evaluate(ctx, &swarm);
    let initial = fitness_weights(&objectives);
    let mut intensity = initial.clone();
    tracker.record();

    for iteration in 1..=params.max_iterations {
        let snapshot = swarm.clone();
        for (i, x) in swarm.iter_mut().enumerate() {
            let mut r = rng::stream(seed, iteration, i);
            let mut moved = false;
            for (j, other) in snapshot.iter().enumerate() {
                if intensity[j] <= intensity[i] {
                    continue;
                }
                let beta = attractiveness(x, other, p.beta0, gamma);
                for (g, o) in x.genes.iter_mut().zip(&other.genes) {
                    *g += beta * (o - *g);
                }
                random_step(ctx, x, p.random_scale, &mut r);
                moved = true;
            }
            if !moved {
                random_step(ctx, x, p.random_scale, &mut r);
            }
            ctx.clamp(x);
        }
        let objectives = tracker.evaluate(ctx, &swarm);
        for ((light, fit), init) in intensity.iter_mut().zip(fitness_weights(&objectives)).zip(&initial) {
            *light = init + p.alpha_intensity * fit;
        }
        tracker.record();
    }
    Ok(tracker.finish(Algorithm::Ffo, seed))
}
