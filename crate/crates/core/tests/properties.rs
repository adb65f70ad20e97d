mod common;

use std::collections::HashSet;
use std::path::Path;

use num_rational::BigRational;
use proptest::prelude::*;
use rtsched_core::feasibility::{penalized_objective, Recourse};
use rtsched_core::io::{instance_from_str, instance_to_string};
use rtsched_core::meta::{crossover, mutate};
use rtsched_core::oracle::greedy_in_roster_order;
use rtsched_core::replay::{replay, ArrivalOrder, ReplayConfig, ReplayMode, Strategy as Policy};
use rtsched_core::rng::{seeded, Draw};
use rtsched_core::{
    build_occupancy, check_constraints, expected_recourse, generate_instance, generate_scenarios, offline_objective,
    os_objective, sessions_of, solve, solve_exact_offline, solve_recourse, Algorithm, Assignment, GeneratorConfig,
    Instance, InstanceConfig, Occupancy, Position, Probability, ProbabilityMode, Scenario, ScenarioSet, Schedule,
    SearchLimits, SolveContext, SolverParams,
};

use common::{brute_force, cost, random_instance, Shape, TINY};

const SMALL: Shape = Shape {
    patients: (1, 6),
    machines: (1, 2),
    days: (2, 8),
    slots: (1, 3),
    sessions_max: 4,
    blocked_max: 4,
};

fn in_bounds(ctx: &SolveContext<'_>, p: &Position) -> bool {
    p.genes.iter().enumerate().all(|(i, g)| {
        let (lo, hi) = ctx.gene_bounds(i);
        (lo..=hi).contains(g)
    })
}

fn unit_genes(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..=1.0, n)
}

fn scaled(ctx: &SolveContext<'_>, unit: &[f64]) -> Position {
    Position::new(
        unit.iter()
            .enumerate()
            .map(|(i, u)| {
                let (lo, hi) = ctx.gene_bounds(i);
                lo + u * (hi - lo)
            })
            .collect(),
    )
}

fn forecast(inst: &Instance, seed: u64) -> ScenarioSet {
    let config = GeneratorConfig {
        scenario_count: 3,
        patients_per_scenario: (0, 2),
        special_ratio: 0.3,
        sessions_range: (1, 2.min(inst.horizon_days())),
        slots_pool: (1..=inst.slots_per_day()).collect(),
        probability_mode: ProbabilityMode::DirichletLikeRandom,
    };
    generate_scenarios(inst, &config, seed).unwrap()
}

fn quick_params() -> SolverParams {
    SolverParams {
        max_iterations: 25,
        ..SolverParams::default()
    }
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![Just(Algorithm::Ga), Just(Algorithm::Ffo), Just(Algorithm::Wo)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn instance_round_trips(seed in any::<u64>()) {
        let inst = random_instance(&SMALL, seed);
        let text = instance_to_string(&inst);
        let back = instance_from_str(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(instance_to_string(&back), text);
    }

    #[test]
    fn generated_instances_round_trip_and_repeat(seed in any::<u64>(), patients in 1usize..12, release_max in 1usize..6) {
        let config = InstanceConfig {
            patients,
            machines: 2,
            days: 10,
            slots: 3,
            special_ratio: 0.4,
            sessions: (1, 5),
            release_max,
            special_slots_pool: Vec::new(),
        };
        let a = generate_instance(&config, seed).unwrap();
        prop_assert_eq!(&a, &generate_instance(&config, seed).unwrap());
        prop_assert!(a.patients().windows(2).all(|w| w[0].release_day <= w[1].release_day));
        let back = instance_from_str(&instance_to_string(&a), Path::new("mem")).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn sessions_are_one_slot_consecutive_days(p in 1usize..6, start in 1usize..10, slot in 1usize..4, machine in 1usize..3) {
        let a = Assignment::new("X", machine, start, slot);
        match sessions_of(&a, p, 10) {
            Ok(cells) => {
                prop_assert!(start + p - 1 <= 10);
                prop_assert_eq!(cells.len(), p);
                prop_assert!(cells.iter().all(|&(_, s)| s == slot));
                prop_assert!(cells.iter().enumerate().all(|(k, &(d, _))| d == start + k));
            }
            Err(_) => prop_assert!(start + p - 1 > 10),
        }
    }

    #[test]
    fn occupancy_is_pure(seed in any::<u64>()) {
        let inst = random_instance(&SMALL, seed);
        let schedule = greedy_in_roster_order(&inst);
        let a = build_occupancy(&inst, &schedule).unwrap();
        prop_assert_eq!(&a, &build_occupancy(&inst, &schedule).unwrap());
        let placed: u64 = schedule
            .assignments
            .values()
            .map(|x| inst.patient(&x.patient_id).unwrap().sessions as u64)
            .sum();
        prop_assert_eq!(a.total(), placed);

        let mut occ = Occupancy::for_instance(&inst);
        let before = occ.clone();
        for x in schedule.assignments.values() {
            occ.occupy(x.machine, x.start_day, x.slot, inst.patient(&x.patient_id).unwrap().sessions);
        }
        for x in schedule.assignments.values() {
            occ.vacate(x.machine, x.start_day, x.slot, inst.patient(&x.patient_id).unwrap().sessions);
        }
        prop_assert_eq!(occ, before);
    }

    #[test]
    fn objective_matches_session_day_sum(seed in any::<u64>()) {
        let inst = random_instance(&SMALL, seed);
        let schedule = greedy_in_roster_order(&inst);
        if schedule.unassigned.is_empty() {
            let placement: Vec<_> = inst
                .patients()
                .iter()
                .map(|p| schedule.get(&p.id).map(|a| (a.machine, a.start_day, a.slot)))
                .collect();
            prop_assert_eq!(offline_objective(&inst, &schedule).unwrap(), cost(&inst, &placement));
            prop_assert!(check_constraints(&inst, &schedule, true).unwrap().is_empty());
        }
    }

    #[test]
    fn violations_have_distinct_locators(seed in any::<u64>(), picks in proptest::collection::vec((0usize..2, 0usize..8, 0usize..3), 6)) {
        let inst = random_instance(&SMALL, seed);
        let mut schedule = Schedule::new();
        for (p, &(m, d, s)) in inst.patients().iter().zip(&picks) {
            let m = 1 + m % inst.machine_count();
            let d = 1 + d % inst.horizon_days();
            let s = 1 + s % inst.slots_per_day();
            schedule.assign(Assignment::new(p.id.clone(), m, d, s));
        }
        let violations = check_constraints(&inst, &schedule, true).unwrap();
        let mut seen = HashSet::new();
        for v in &violations {
            let key = (v.code, v.patients.clone(), v.machine, v.day, v.slot);
            prop_assert!(seen.insert(key), "duplicate violation {:?}", v);
        }
    }

    #[test]
    fn decoder_is_total_and_consistent(seed in any::<u64>(), unit in unit_genes(12)) {
        let inst = random_instance(&SMALL, seed);
        let ctx = SolveContext::offline(&inst);
        let position = scaled(&ctx, &unit[..ctx.gene_count()]);
        let decoded = ctx.decode(&position).unwrap();
        let violations = check_constraints(&inst, &decoded.schedule, false).unwrap();
        prop_assert!(rtsched_core::feasibility::is_feasible_partial(&violations));
        prop_assert_eq!(decoded.penalty == 0.0, decoded.schedule.unassigned.is_empty());
        prop_assert_eq!(decoded.objective_with_penalty, penalized_objective(&inst, &decoded.schedule).unwrap() as f64);
        if decoded.penalty == 0.0 {
            prop_assert_eq!(decoded.objective_with_penalty, offline_objective(&inst, &decoded.schedule).unwrap() as f64);
        }
        let again = ctx.decode(&ctx.encode(&decoded.schedule, &[])).unwrap();
        prop_assert_eq!(again.schedule.assignments, decoded.schedule.assignments.clone());
    }

    #[test]
    fn os_decoding_matches_encoded_objective(seed in any::<u64>(), unit in unit_genes(40)) {
        let inst = random_instance(&SMALL, seed);
        let set = forecast(&inst, seed);
        let ids: Vec<&str> = inst.patients().iter().map(|p| p.id.as_str()).collect();
        let (pending, earlier) = ids.split_last().unwrap();
        let frozen = rtsched_core::greedy_first_fit(&inst, earlier).unwrap();
        let ctx = SolveContext::os(&inst, &frozen, pending, &set, 1).unwrap();
        let decoded = ctx.decode(&scaled(&ctx, &unit[..ctx.gene_count()])).unwrap();
        let full = ctx.full_schedule(&decoded);
        if decoded.penalty == 0.0 {
            let encoded = os_objective(&inst, &full, pending, &set, Recourse::Encoded(&decoded.scenario_schedules), 1).unwrap();
            let exact = os_objective(&inst, &full, pending, &set, Recourse::Exact, 1).unwrap();
            let value = num_traits::ToPrimitive::to_f64(&encoded).unwrap();
            prop_assert!((decoded.objective_with_penalty - value).abs() < 1e-9);
            prop_assert!(encoded >= exact);
        } else {
            prop_assert!(decoded.objective_with_penalty > 0.0);
        }
    }

    #[test]
    fn operators_stay_in_bounds(seed in any::<u64>(), unit in unit_genes(12), other in unit_genes(12), rate in 0.0f64..=1.0) {
        let inst = random_instance(&SMALL, seed);
        let ctx = SolveContext::offline(&inst);
        let n = ctx.gene_count();
        let a = scaled(&ctx, &unit[..n]);
        let b = scaled(&ctx, &other[..n]);
        let mut r = seeded(seed);
        let (c, d) = crossover(&a, &b, &mut r).unwrap();
        prop_assert!(in_bounds(&ctx, &c) && in_bounds(&ctx, &d));
        prop_assert!(in_bounds(&ctx, &mutate(&a, rate, &mut r, &ctx)));
        let mut wild = Position::new(unit[..n].iter().map(|u| (u - 0.5) * 1e3).collect());
        if n > 0 {
            wild.genes[0] = f64::NAN;
        }
        ctx.clamp(&mut wild);
        prop_assert!(in_bounds(&ctx, &wild));
    }

    #[test]
    fn greedy_never_beats_exact(seed in any::<u64>()) {
        let inst = random_instance(&SMALL, seed);
        let greedy = greedy_in_roster_order(&inst);
        if let Some(opt) = solve_exact_offline(&inst, SearchLimits::unlimited()).optimum() {
            if greedy.unassigned.is_empty() {
                prop_assert!(offline_objective(&inst, &greedy).unwrap() >= opt);
            }
        }
    }

    #[test]
    fn recourse_on_empty_grid_is_the_offline_optimum(seed in any::<u64>()) {
        let base = random_instance(&TINY, seed);
        let scenario = Scenario {
            id: "w".into(),
            probability: Probability::ratio(1, 1),
            patients: base.patients().to_vec(),
        };
        let as_instance = base.with_roster(scenario.patients.clone());
        let q = solve_recourse(&base, &Occupancy::for_instance(&base), &scenario);
        let l = base.horizon_days() as u64;
        let penalty: u64 = scenario.patients.iter().map(|p| (l + 1) * p.sessions as u64).sum();
        prop_assert_eq!(q, brute_force(&as_instance).unwrap_or(penalty));
    }

    #[test]
    fn splitting_a_scenario_k_ways_keeps_expected_recourse(seed in any::<u64>(), k in 2usize..5, which in 0usize..3) {
        let inst = random_instance(&SMALL, seed);
        let occ = build_occupancy(&inst, &greedy_in_roster_order(&inst)).unwrap();
        let set = forecast(&inst, seed ^ 0x5eed);
        let which = which % set.len();
        let mut r = seeded(seed);
        let weights: Vec<i64> = (0..k).map(|_| r.between(1, 5) as i64).collect();
        let total: i64 = weights.iter().sum();
        let mut split = set.clone();
        let original = split.scenarios.remove(which);
        for (j, w) in weights.iter().enumerate().rev() {
            let mut copy = original.clone();
            copy.id = format!("{}_{j}", original.id);
            copy.probability = Probability::from_rational(
                original.probability.value() * BigRational::new((*w).into(), total.into()),
            );
            split.scenarios.insert(which, copy);
        }
        prop_assert_eq!(split.probability_sum(), BigRational::from_integer(1.into()));
        prop_assert_eq!(expected_recourse(&inst, &occ, &split), expected_recourse(&inst, &occ, &set));
    }

    #[test]
    fn scenario_generation_repeats(seed in any::<u64>()) {
        let inst = random_instance(&SMALL, seed);
        prop_assert_eq!(forecast(&inst, seed), forecast(&inst, seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_runs_are_elitist_deterministic_and_bounded(seed in any::<u64>(), algo in algorithm(), run_seed in 0u64..1000) {
        let inst = random_instance(&TINY, seed);
        let ctx = SolveContext::offline(&inst);
        let params = quick_params();
        let run = solve(algo, &ctx, &params, run_seed).unwrap();
        prop_assert!(run.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(run.trace.len(), params.max_iterations + 1);
        prop_assert!(run.convergence_iteration <= run.iterations_run);
        prop_assert_eq!(run.best_objective, *run.trace.last().unwrap());

        let again = solve(algo, &ctx, &params, run_seed).unwrap();
        prop_assert_eq!(&again.trace, &run.trace);
        prop_assert_eq!(&again.best, &run.best);

        let violations = check_constraints(&inst, &run.best.schedule, false).unwrap();
        prop_assert!(rtsched_core::feasibility::is_feasible_partial(&violations));
        prop_assert_eq!(run.infeasible, run.best.penalty > 0.0);
        if let Some(opt) = solve_exact_offline(&inst, SearchLimits::unlimited()).optimum() {
            prop_assert!(run.best_objective >= opt as f64);
        }
    }

    #[test]
    fn oracle_agrees_with_enumeration(seed in any::<u64>()) {
        let inst = random_instance(&TINY, seed);
        let outcome = solve_exact_offline(&inst, SearchLimits::unlimited());
        match brute_force(&inst) {
            Some(best) => {
                prop_assert_eq!(outcome.optimum(), Some(best));
                let schedule = &outcome.result().unwrap().schedule;
                prop_assert!(check_constraints(&inst, schedule, true).unwrap().is_empty());
            }
            None => prop_assert!(outcome.is_infeasible()),
        }
    }

    #[test]
    fn replay_freezes_earlier_arrivals(seed in any::<u64>(), strategy in prop_oneof![
        Just(Policy::Greedy),
        Just(Policy::Exact),
        Just(Policy::Meta(Algorithm::Ga)),
        Just(Policy::Meta(Algorithm::Wo)),
    ], os in any::<bool>()) {
        let config = InstanceConfig {
            patients: 5,
            machines: 1,
            days: 8,
            slots: 2,
            special_ratio: 0.3,
            sessions: (1, 3),
            release_max: 4,
            special_slots_pool: Vec::new(),
        };
        let inst = generate_instance(&config, seed).unwrap();
        let set = forecast(&inst, seed);
        let params = quick_params();
        let cfg = ReplayConfig {
            strategy,
            mode: if os { ReplayMode::Os } else { ReplayMode::Online },
            order: ArrivalOrder::Release,
            scenarios: os.then_some(&set),
            params: &params,
            seed,
        };
        let out = replay(&inst, &cfg).unwrap();
        prop_assert_eq!(out.snapshots.len(), inst.patients().len());
        for w in out.snapshots.windows(2) {
            for (id, a) in &w[0].assignments {
                prop_assert_eq!(w[1].get(id), Some(a));
            }
        }
        for d in &out.decisions {
            if let Some(a) = &d.assignment {
                prop_assert!(a.start_day >= inst.patient(&d.patient_id).unwrap().release_day);
            }
        }
        let violations = check_constraints(&inst, &out.schedule, false).unwrap();
        prop_assert!(rtsched_core::feasibility::is_feasible_partial(&violations));
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
