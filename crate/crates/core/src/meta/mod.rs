//! Population metaheuristics over a shared continuous encoding.
//!
//! All three solvers keep an elitist best-so-far outside the population, so
//! every trace is monotone non-increasing. Random draws come from counted
//! ChaCha8 streams keyed by `(seed, iteration, member)`.

mod decode;
pub mod ffo;
pub mod ga;
pub mod wo;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Draw, Rng};

pub use decode::{DecodedSolution, Mode, SolveContext};

/// Tolerance used to locate the convergence iteration.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub genes: Vec<f64>,
}

impl Position {
    pub fn new(genes: Vec<f64>) -> Self {
        Position { genes }
    }

    /// Uniform in every gene's bounds.
    pub fn random(ctx: &SolveContext<'_>, rng: &mut Rng) -> Self {
        Position {
            genes: (0..ctx.gene_count())
                .map(|i| {
                    let (lo, hi) = ctx.gene_bounds(i);
                    rng.uniform(lo, hi)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn distance_squared(&self, other: &Position) -> f64 {
        self.genes.iter().zip(&other.genes).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ga,
    Ffo,
    Wo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ga, Algorithm::Ffo, Algorithm::Wo];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Ffo => "ffo",
            Algorithm::Wo => "wo",
        }
    }

    pub fn default_population(self) -> usize {
        match self {
            Algorithm::Ga => 50,
            Algorithm::Ffo => 25,
            Algorithm::Wo => 30,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ga" => Ok(Algorithm::Ga),
            "ffo" => Ok(Algorithm::Ffo),
            "wo" => Ok(Algorithm::Wo),
            other => Err(Error::InvalidParams(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            crossover_rate: 0.8,
            mutation_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfoParams {
    /// Attractiveness at distance zero.
    pub beta0: f64,
    /// Light absorption; `None` means `1/(L^2 + T^2)`.
    pub gamma: Option<f64>,
    /// Weight of the fitness term in the intensity update.
    pub alpha_intensity: f64,
    /// Random step as a fraction of each gene's range.
    pub random_scale: f64,
}

impl Default for FfoParams {
    fn default() -> Self {
        FfoParams {
            beta0: 1.0,
            gamma: None,
            alpha_intensity: 1.0,
            random_scale: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WoParams {
    /// Initial bound of the alpha step coefficient `A ~ U(-a, a)`; decays linearly to 0.
    pub a_initial: f64,
    /// Per-gene probability that an omega gene is redrawn uniformly.
    pub jitter_rate: f64,
}

impl Default for WoParams {
    fn default() -> Self {
        WoParams {
            a_initial: 2.0,
            jitter_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// `None` selects the algorithm's default (GA 50, FFO 25, WO 30).
    pub population_size: Option<usize>,
    pub max_iterations: usize,
    pub ga: GaParams,
    pub ffo: FfoParams,
    pub wo: WoParams,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            population_size: None,
            max_iterations: 200,
            ga: GaParams::default(),
            ffo: FfoParams::default(),
            wo: WoParams::default(),
        }
    }
}

impl SolverParams {
    pub fn population_for(&self, algorithm: Algorithm) -> usize {
        self.population_size.unwrap_or_else(|| algorithm.default_population())
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let pop = self.population_for(algorithm);
        let min_pop = if algorithm == Algorithm::Wo { 3 } else { 2 };
        if pop < min_pop {
            return bad(format!("{algorithm} needs a population of at least {min_pop}, got {pop}"));
        }
        let rates = [
            ("crossover_rate", self.ga.crossover_rate),
            ("mutation_rate", self.ga.mutation_rate),
            ("jitter_rate", self.wo.jitter_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} outside [0, 1]"));
            }
        }
        let finite = [
            ("beta0", self.ffo.beta0),
            ("gamma", self.ffo.gamma.unwrap_or(0.0)),
            ("alpha_intensity", self.ffo.alpha_intensity),
            ("random_scale", self.ffo.random_scale),
            ("a_initial", self.wo.a_initial),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub best: DecodedSolution,
    pub best_objective: f64,
    /// `trace[0]` is the best of the initial population; `trace[k]` the best
    /// so far after iteration `k`.
    pub trace: Vec<f64>,
    pub convergence_iteration: usize,
    #[serde(with = "millis")]
    pub wall_time: Duration,
    pub seed: u64,
    pub iterations_run: usize,
    pub evaluations: u64,
    /// Set when even the best solution leaves some patient unplaced.
    pub infeasible: bool,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}

/// First index whose value is within [`CONVERGENCE_TOLERANCE`] of the last.
pub fn convergence_iteration(trace: &[f64]) -> usize {
    let Some(&last) = trace.last() else { return 0 };
    trace
        .iter()
        .position(|&v| v <= last + CONVERGENCE_TOLERANCE)
        .unwrap_or(trace.len() - 1)
}

/// Roulette weights for a minimization objective:
/// `w_k = (max - obj_k) + 1e-6 * (1 + max)`.
pub fn fitness_weights(objectives: &[f64]) -> Vec<f64> {
    let max = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-6 * (1.0 + max.abs());
    objectives.iter().map(|&o| (max - o) + eps).collect()
}

/// Index `k` drawn with probability `w_k / sum(w)`.
pub fn roulette_select(weights: &[f64], rng: &mut Rng) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::NonPositiveWeights(total));
    }
    let target = rng.unit() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return Ok(k);
        }
    }
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}

/// One-point crossover applied independently to the start-day half and the
/// slot half, with cut points uniform in `0..=n`.
pub fn crossover(a: &Position, b: &Position, rng: &mut Rng) -> Result<(Position, Position)> {
    if a.len() != b.len() || a.len() % 2 != 0 {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len() / 2;
    let cut_start = rng.between(0, n);
    let cut_slot = rng.between(0, n);
    crossover_at(a, b, cut_start, cut_slot)
}

/// Crossover with explicit cuts: `child_a` takes `a` before each cut and `b`
/// from the cut on; `child_b` the reverse.
pub fn crossover_at(a: &Position, b: &Position, cut_start: usize, cut_slot: usize) -> Result<(Position, Position)> {
    if a.len() != b.len() || a.len() % 2 != 0 {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len() / 2;
    let (cut_start, cut_slot) = (cut_start.min(n), cut_slot.min(n));
    let mut ca = a.genes.clone();
    let mut cb = b.genes.clone();
    for i in (cut_start..n).chain(n + cut_slot..2 * n) {
        ca[i] = b.genes[i];
        cb[i] = a.genes[i];
    }
    Ok((Position::new(ca), Position::new(cb)))
}

/// Redraws each gene uniformly within its bounds with probability `rate`.
pub fn mutate(position: &Position, rate: f64, rng: &mut Rng, ctx: &SolveContext<'_>) -> Position {
    let mut out = position.clone();
    for (i, g) in out.genes.iter_mut().enumerate() {
        if rng.chance(rate) {
            let (lo, hi) = ctx.gene_bounds(i);
            *g = rng.uniform(lo, hi);
        }
    }
    out
}

/// Elitist best-so-far bookkeeping shared by the solvers.
pub(crate) struct Tracker {
    best: Option<(f64, Position, DecodedSolution)>,
    trace: Vec<f64>,
    evaluations: u64,
    started: Instant,
}

impl Tracker {
    pub(crate) fn new() -> Self {
        Tracker {
            best: None,
            trace: Vec::new(),
            evaluations: 0,
            started: Instant::now(),
        }
    }

    /// Decodes and scores a population, updating the incumbent.
    pub(crate) fn evaluate(&mut self, ctx: &SolveContext<'_>, population: &[Position]) -> Vec<f64> {
        population
            .iter()
            .map(|p| {
                let decoded = ctx.decode_unchecked(p);
                self.evaluations += 1;
                let obj = decoded.objective_with_penalty;
                if self.best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
                    self.best = Some((obj, p.clone(), decoded));
                }
                obj
            })
            .collect()
    }

    /// The incumbent's decoded placements as a position.
    pub(crate) fn incumbent_decoded(&self, ctx: &SolveContext<'_>) -> Position {
        let best = &self.best.as_ref().expect("evaluated at least once").2;
        ctx.encode(&best.schedule, &best.scenario_schedules)
    }

    pub(crate) fn record(&mut self) {
        let best = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
        self.trace.push(best);
    }

    pub(crate) fn finish(self, algorithm: Algorithm, seed: u64) -> RunResult {
        let (best_objective, _, best) = self.best.expect("evaluated at least once");
        let iterations_run = self.trace.len().saturating_sub(1);
        RunResult {
            algorithm,
            infeasible: best.penalty > 0.0,
            best,
            best_objective,
            convergence_iteration: convergence_iteration(&self.trace),
            trace: self.trace,
            wall_time: self.started.elapsed(),
            seed,
            iterations_run,
            evaluations: self.evaluations,
        }
    }
}

/// Runs `algorithm` on `ctx`.
pub fn solve(algorithm: Algorithm, ctx: &SolveContext<'_>, params: &SolverParams, seed: u64) -> Result<RunResult> {
    match algorithm {
        Algorithm::Ga => ga::ga_solve(ctx, params, seed),
        Algorithm::Ffo => ffo::ffo_solve(ctx, params, seed),
        Algorithm::Wo => wo::wo_solve(ctx, params, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Instance, Patient};
    use crate::rng;

    #[test]
    fn weights_favor_lower_objectives() {
        let w = fitness_weights(&[9.0, 12.0]);
        assert!(w[0] > w[1]);
        assert!(w.iter().all(|&x| x > 0.0));
        let w = fitness_weights(&[5.0, 5.0, 5.0]);
        assert!(w.iter().all(|&x| x == w[0]));
    }

    #[test]
    fn roulette_singleton_and_errors() {
        let mut r = rng::seeded(1);
        for _ in 0..100 {
            assert_eq!(roulette_select(&[5.0], &mut r).unwrap(), 0);
        }
        assert!(roulette_select(&[0.0, 0.0], &mut r).is_err());
        assert!(roulette_select(&[], &mut r).is_err());
        assert!(roulette_select(&[f64::INFINITY], &mut r).is_err());
    }

    #[test]
    fn crossover_with_fixed_cuts() {
        let a = Position::new(vec![1.0, 2.0, 1.0, 2.0]);
        let b = Position::new(vec![3.0, 4.0, 2.0, 1.0]);
        let (ca, cb) = crossover_at(&a, &b, 1, 1).unwrap();
        assert_eq!(ca.genes, vec![1.0, 4.0, 1.0, 1.0]);
        assert_eq!(cb.genes, vec![3.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let a = Position::new(vec![1.5, 2.5, 1.0, 2.0]);
        let mut r = rng::seeded(4);
        let (ca, cb) = crossover(&a, &a, &mut r).unwrap();
        assert_eq!(ca, a);
        assert_eq!(cb, a);
        assert!(crossover(&a, &Position::new(vec![1.0, 1.0]), &mut r).is_err());
    }

    #[test]
    fn mutation_rates() {
        let inst = Instance::new(1, 10, 3).with_patients((0..5).map(|i| Patient::general(format!("P{i}"), 1)));
        let ctx = SolveContext::offline(&inst);
        let mut r = rng::seeded(2);
        let p = Position::random(&ctx, &mut r);
        assert_eq!(mutate(&p, 0.0, &mut r, &ctx), p);
        let m = mutate(&p, 1.0, &mut r, &ctx);
        for (i, g) in m.genes.iter().enumerate() {
            let (lo, hi) = ctx.gene_bounds(i);
            assert!((lo..=hi).contains(g));
        }
    }

    #[test]
    fn convergence_iteration_of_traces() {
        assert_eq!(convergence_iteration(&[10.0, 9.0, 9.0, 9.0]), 1);
        assert_eq!(convergence_iteration(&[7.0]), 0);
        assert_eq!(convergence_iteration(&[10.0, 9.0, 8.0]), 2);
    }

    #[test]
    fn unknown_algorithm_name() {
        assert!("sa".parse::<Algorithm>().is_err());
        assert_eq!("wo".parse::<Algorithm>().unwrap(), Algorithm::Wo);
    }

    #[test]
    fn params_validation() {
        let mut p = SolverParams::default();
        assert!(p.validate(Algorithm::Ga).is_ok());
        p.population_size = Some(2);
        assert!(p.validate(Algorithm::Ga).is_ok());
        assert!(p.validate(Algorithm::Wo).is_err());
        let mut p = SolverParams::default();
        p.ga.mutation_rate = 1.5;
        assert!(p.validate(Algorithm::Ga).is_err());
    }
}
