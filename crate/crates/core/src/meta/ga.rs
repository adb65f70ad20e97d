//! Genetic algorithm: roulette selection, per-half one-point crossover,
//! uniform gene mutation, and one elite carried over unchanged.

use crate::error::Result;
use crate::rng;

use super::{crossover, fitness_weights, mutate, roulette_select, Algorithm, Position, RunResult, SolveContext, SolverParams, Tracker};

pub fn ga_solve(ctx: &SolveContext<'_>, params: &SolverParams, seed: u64) -> Result<RunResult> {
    params.validate(Algorithm::Ga)?;
    let pop_size = params.population_for(Algorithm::Ga);
    let mut tracker = Tracker::new();

    let mut population: Vec<Position> = (0..pop_size)
        .map(|k| Position::random(ctx, &mut rng::stream(seed, 0, k)))
        .collect();
    let mut objectives = tracker.evaluate(ctx, &population);
    tracker.record();

    for iteration in 1..=params.max_iterations {
        let weights = fitness_weights(&objectives);
        let elite = objectives
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("non-empty population");

        let mut next = Vec::with_capacity(pop_size);
        next.push(population[elite].clone());
        let mut pair = 0;
        while next.len() < pop_size {
            let mut r = rng::stream(seed, iteration, pair);
            pair += 1;
            let a = &population[roulette_select(&weights, &mut r)?];
            let b = &population[roulette_select(&weights, &mut r)?];
            let (c1, c2) = if rng::Draw::chance(&mut r, params.ga.crossover_rate) {
                crossover(a, b, &mut r)?
            } else {
                (a.clone(), b.clone())
            };
            next.push(mutate(&c1, params.ga.mutation_rate, &mut r, ctx));
            if next.len() < pop_size {
                next.push(mutate(&c2, params.ga.mutation_rate, &mut r, ctx));
            }
        }
        // The elite's objective is already known; only offspring are decoded.
        let elite_objective = objectives[elite];
        let mut offspring = tracker.evaluate(ctx, &next[1..]);
        offspring.insert(0, elite_objective);
        objectives = offspring;
        population = next;
        tracker.record();
    }
    Ok(tracker.finish(Algorithm::Ga, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Instance, Patient};

    fn i1() -> Instance {
        Instance::new(1, 5, 2)
            .with_patient(Patient::general("P1", 2))
            .with_patient(Patient::special("P2", 3, [2]))
    }

    #[test]
    fn ga_finds_i1_optimum_and_is_reproducible() {
        let inst = i1();
        let ctx = SolveContext::offline(&inst);
        let params = SolverParams::default();
        let a = ga_solve(&ctx, &params, 42).unwrap();
        assert_eq!(a.best_objective, 9.0);
        assert_eq!(a.trace.len(), params.max_iterations + 1);
        assert!(a.trace.windows(2).all(|w| w[1] <= w[0]));
        let b = ga_solve(&ctx, &params, 42).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best, b.best);
    }
}
