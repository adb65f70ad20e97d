//! Wolf-pack optimization.
//!
//! The pack is ranked each iteration: the best wolf is alpha, the second beta,
//! the rest omegas. Alpha steps `alpha - A * D` with `A ~ U(-a, a)` per gene,
//! `a` falling linearly from `a_initial` to 0, and `D = |prey - alpha|` where
//! the prey is the incumbent's decoded placement (integer start and slot
//! genes after repair). Beta moves to `(alpha + beta) / 2` and each omega
//! to `(alpha + omega) / 2`, after which omega genes are redrawn uniformly
//! with probability `jitter_rate`.

use crate::error::Result;
use crate::rng::{self, Draw};

use super::{Algorithm, Position, RunResult, SolveContext, SolverParams, Tracker};

/// One gene of the alpha move.
pub fn alpha_move(alpha: f64, step: f64, distance: f64) -> f64 {
    alpha - step * distance
}

/// Beta and omega moves: the midpoint with alpha.
pub fn follow(alpha: f64, follower: f64) -> f64 {
    (alpha + follower) / 2.0
}

pub fn wo_solve(ctx: &SolveContext<'_>, params: &SolverParams, seed: u64) -> Result<RunResult> {
    params.validate(Algorithm::Wo)?;
    let pop_size = params.population_for(Algorithm::Wo);
    let p = &params.wo;
    let mut tracker = Tracker::new();

    let mut pack: Vec<Position> = (0..pop_size)
        .map(|k| Position::random(ctx, &mut rng::stream(seed, 0, k)))
        .collect();
    let mut objectives = tracker.evaluate(ctx, &pack);
    tracker.record();

    let max_it = params.max_iterations;
    for iteration in 1..=max_it {
        let a = if max_it > 1 {
            p.a_initial * (1.0 - (iteration - 1) as f64 / (max_it - 1) as f64)
        } else {
            p.a_initial
        };
        let mut rank: Vec<usize> = (0..pop_size).collect();
        rank.sort_by(|&x, &y| objectives[x].total_cmp(&objectives[y]).then(x.cmp(&y)));
        let (alpha_idx, beta_idx) = (rank[0], rank[1]);
        let alpha = pack[alpha_idx].clone();
        let prey = tracker.incumbent_decoded(ctx);

        for (k, wolf) in pack.iter_mut().enumerate() {
            let mut r = rng::stream(seed, iteration, k);
            if k == alpha_idx {
                for (g, target) in wolf.genes.iter_mut().zip(&prey.genes) {
                    let step = r.uniform(-a, a);
                    *g = alpha_move(*g, step, (target - *g).abs());
                }
            } else {
                for (g, lead) in wolf.genes.iter_mut().zip(&alpha.genes) {
                    *g = follow(*lead, *g);
                }
                if k != beta_idx {
                    for (i, g) in wolf.genes.iter_mut().enumerate() {
                        if r.chance(p.jitter_rate) {
                            let (lo, hi) = ctx.gene_bounds(i);
                            *g = r.uniform(lo, hi);
                        }
                    }
                }
            }
            ctx.clamp(wolf);
        }
        objectives = tracker.evaluate(ctx, &pack);
        tracker.record();
    }
    Ok(tracker.finish(Algorithm::Wo, seed))
}
