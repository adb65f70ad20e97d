//! Reference solvers: depth-first branch and bound for the offline model and
//! for per-scenario recourse, plus the first-fit greedy that stands in for
//! manual scheduling.
//!
//! A patient's placement is a single `(machine, start_day, slot)` block of
//! `sessions` consecutive days. Candidates are enumerated by start day, then
//! slot, then machine, which is also ascending cost order because a patient's
//! cost `p*start + p(p-1)/2` only depends on the start day.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{treatment_days, Assignment, Instance, Occupancy, Patient, Schedule};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub machine: usize,
    pub start_day: usize,
    pub slot: usize,
    pub cost: u64,
}

impl Candidate {
    pub fn to_assignment(self, patient_id: &str) -> Assignment {
        Assignment::new(patient_id, self.machine, self.start_day, self.slot)
    }
}

/// Whether the block fits the horizon, is available on `machine` and is
/// unoccupied.
#[inline]
pub fn block_fits(
    instance: &Instance,
    occupancy: &Occupancy,
    machine: usize,
    start_day: usize,
    slot: usize,
    sessions: usize,
) -> bool {
    start_day >= 1
        && start_day + sessions - 1 <= instance.horizon_days()
        && (start_day..start_day + sessions).all(|d| instance.is_available(machine, d, slot))
        && occupancy.block_is_free(machine, start_day, slot, sessions)
}

/// All feasible placements of `patient` given `occupancy`, cheapest first.
pub fn candidate_assignments(instance: &Instance, patient: &Patient, occupancy: &Occupancy) -> Vec<Candidate> {
    candidate_assignments_from(instance, patient, occupancy, 1)
}

/// As [`candidate_assignments`], restricted to starts on or after `earliest_day`.
pub fn candidate_assignments_from(
    instance: &Instance,
    patient: &Patient,
    occupancy: &Occupancy,
    earliest_day: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for_each_candidate(instance, patient, occupancy, earliest_day, |c| {
        out.push(c);
        true
    });
    out
}

/// First candidate in scan order (day, then slot, then machine).
pub fn first_fit(instance: &Instance, patient: &Patient, occupancy: &Occupancy, earliest_day: usize) -> Option<Candidate> {
    let mut found = None;
    for_each_candidate(instance, patient, occupancy, earliest_day, |c| {
        found = Some(c);
        false
    });
    found
}

/// Visits candidates in cost order until `visit` returns `false`.
fn for_each_candidate(
    instance: &Instance,
    patient: &Patient,
    occupancy: &Occupancy,
    earliest_day: usize,
    mut visit: impl FnMut(Candidate) -> bool,
) {
    let p = patient.sessions;
    if p == 0 || p > instance.horizon_days() {
        return;
    }
    let last_start = instance.horizon_days() - p + 1;
    for start in earliest_day.max(1)..=last_start {
        let cost = treatment_days(p, start);
        for slot in 1..=instance.slots_per_day() {
            if !patient.accepts_slot(slot) {
                continue;
            }
            for machine in 1..=instance.machine_count() {
                if block_fits(instance, occupancy, machine, start, slot, p)
                    && !visit(Candidate {
                        machine,
                        start_day: start,
                        slot,
                        cost,
                    })
                {
                    return;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub node_cap: Option<u64>,
    /// Wall-clock cap. Results that hit it are not reproducible; batch
    /// experiments use only the node cap.
    pub time_cap: Option<Duration>,
}

impl SearchLimits {
    pub fn unlimited() -> Self {
        SearchLimits {
            node_cap: None,
            time_cap: None,
        }
    }

    pub fn nodes(cap: u64) -> Self {
        SearchLimits {
            node_cap: Some(cap),
            time_cap: None,
        }
    }
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits::nodes(20_000_000)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimalResult {
    pub schedule: Schedule,
    pub objective: u64,
    pub nodes_explored: u64,
    /// No feasible schedule has a smaller objective.
    pub proven_optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExactOutcome {
    Feasible(OptimalResult),
    /// The search completed without finding a complete schedule.
    Infeasible { nodes_explored: u64 },
    /// Limits were exhausted before any complete schedule was found.
    Undecided { nodes_explored: u64 },
}

impl ExactOutcome {
    pub fn result(&self) -> Option<&OptimalResult> {
        match self {
            ExactOutcome::Feasible(r) => Some(r),
            _ => None,
        }
    }

    /// The objective, only when proven optimal.
    pub fn optimum(&self) -> Option<u64> {
        self.result().filter(|r| r.proven_optimal).map(|r| r.objective)
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, ExactOutcome::Infeasible { .. })
    }

    pub fn nodes_explored(&self) -> u64 {
        match self {
            ExactOutcome::Feasible(r) => r.nodes_explored,
            ExactOutcome::Infeasible { nodes_explored } | ExactOutcome::Undecided { nodes_explored } => *nodes_explored,
        }
    }
}

struct Search<'a> {
    instance: &'a Instance,
    patients: Vec<&'a Patient>,
    earliest: usize,
    occ: Occupancy,
    /// `suffix_bound[k]`: sum of the cheapest unobstructed cost of patients `k..`.
    suffix_bound: Vec<u64>,
    /// Machines with no blocked cells; an empty one of these is
    /// interchangeable with any other empty one.
    unblocked: Vec<bool>,
    machine_load: Vec<usize>,
    path: Vec<(usize, usize, usize)>,
    best: Option<(u64, Vec<(usize, usize, usize)>)>,
    nodes: u64,
    limits: SearchLimits,
    started: Instant,
    aborted: bool,
}

enum SearchEnd {
    Complete,
    Aborted,
}

impl<'a> Search<'a> {
    fn new(
        instance: &'a Instance,
        patients: impl IntoIterator<Item = &'a Patient>,
        base: Occupancy,
        earliest: usize,
        limits: SearchLimits,
    ) -> Option<Self> {
        let mut patients: Vec<&Patient> = patients.into_iter().collect();
        // Largest courses first; the sort is stable so roster order breaks ties.
        patients.sort_by(|a, b| b.sessions.cmp(&a.sessions));
        let mut bounds = Vec::with_capacity(patients.len());
        for p in &patients {
            bounds.push(first_fit(instance, p, &base, earliest)?.cost);
        }
        let mut suffix_bound = vec![0; patients.len() + 1];
        for k in (0..patients.len()).rev() {
            suffix_bound[k] = suffix_bound[k + 1] + bounds[k];
        }
        let (machines, days, slots) = base.dims();
        let unblocked = (1..=machines)
            .map(|m| (1..=days).all(|d| (1..=slots).all(|s| instance.is_available(m, d, s))))
            .collect();
        let machine_load = (1..=machines)
            .map(|m| {
                (1..=days)
                    .flat_map(|d| (1..=slots).map(move |s| (d, s)))
                    .filter(|&(d, s)| base.used(m, d, s))
                    .count()
            })
            .collect();
        Some(Search {
            instance,
            patients,
            earliest,
            occ: base,
            suffix_bound,
            unblocked,
            machine_load,
            path: Vec::new(),
            best: None,
            nodes: 0,
            limits,
            started: Instant::now(),
            aborted: false,
        })
    }

    fn run(&mut self) -> SearchEnd {
        self.dfs(0, 0);
        if self.aborted {
            SearchEnd::Aborted
        } else {
            SearchEnd::Complete
        }
    }

    fn out_of_budget(&self) -> bool {
        if self.limits.node_cap.is_some_and(|cap| self.nodes >= cap) {
            return true;
        }
        match self.limits.time_cap {
            Some(cap) if self.nodes % 1024 == 0 => self.started.elapsed() >= cap,
            _ => false,
        }
    }

    fn dfs(&mut self, depth: usize, cost: u64) {
        if self.out_of_budget() {
            self.aborted = true;
            return;
        }
        self.nodes += 1;
        if depth == self.patients.len() {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, self.path.clone()));
            }
            return;
        }
        let patient = self.patients[depth];
        let p = patient.sessions;
        let horizon = self.instance.horizon_days();
        if p == 0 || p > horizon {
            return;
        }
        for start in self.earliest.max(1)..=horizon - p + 1 {
            let c = cost + treatment_days(p, start);
            if let Some((b, _)) = &self.best {
                if c + self.suffix_bound[depth + 1] >= *b {
                    // Later starts only cost more.
                    break;
                }
            }
            for slot in 1..=self.instance.slots_per_day() {
                if !patient.accepts_slot(slot) {
                    continue;
                }
                let mut tried_empty = false;
                for machine in 1..=self.instance.machine_count() {
                    let interchangeable = self.unblocked[machine - 1] && self.machine_load[machine - 1] == 0;
                    if interchangeable && tried_empty {
                        continue;
                    }
                    if !block_fits(self.instance, &self.occ, machine, start, slot, p) {
                        continue;
                    }
                    tried_empty |= interchangeable;
                    self.occ.occupy(machine, start, slot, p);
                    if self.completion_bound(depth + 1).is_some_and(|lb| self.beats_best(c + lb)) {
                        self.machine_load[machine - 1] += p;
                        self.path.push((machine, start, slot));
                        self.dfs(depth + 1, c);
                        self.path.pop();
                        self.machine_load[machine - 1] -= p;
                    }
                    self.occ.vacate(machine, start, slot, p);
                    if self.aborted {
                        return;
                    }
                }
            }
        }
    }

    /// Lower bound on the cost of placing patients `depth..` on the current
    /// occupancy, or `None` when they provably cannot all be placed.
    ///
    /// Two relaxations: each patient alone at its cheapest placement, and,
    /// for a slot set `A`, the patients confined to `A` taking the cheapest
    /// free cells of `A` one session at a time (contiguity dropped).
    fn completion_bound(&self, depth: usize) -> Option<u64> {
        let rest = &self.patients[depth..];
        let alone: Vec<u64> = rest
            .iter()
            .map(|q| first_fit(self.instance, q, &self.occ, self.earliest).map(|c| c.cost))
            .collect::<Option<_>>()?;
        let total: u64 = alone.iter().sum();
        let mut bound = total;
        let slots = self.instance.slots_per_day();
        let mut sets: Vec<Vec<usize>> = vec![(1..=slots).collect()];
        for q in rest.iter().filter(|q| q.is_special()) {
            let set: Vec<usize> = q.allowed_slots.iter().copied().filter(|&s| s <= slots).collect();
            if !sets.contains(&set) {
                sets.push(set);
            }
        }
        for set in &sets {
            let confined = |q: &Patient| set.len() == slots || (q.is_special() && q.allowed_slots.iter().all(|s| set.contains(s)));
            let mut sessions = 0;
            let mut others = 0;
            for (q, &a) in rest.iter().zip(&alone) {
                if confined(q) {
                    sessions += q.sessions;
                } else {
                    others += a;
                }
            }
            if sessions == 0 {
                continue;
            }
            bound = bound.max(others + self.cheapest_cells(set, sessions)?);
        }
        Some(bound)
    }

    /// Sum of the days of the `n` earliest free cells within `slots`.
    fn cheapest_cells(&self, slots: &[usize], n: usize) -> Option<u64> {
        let mut left = n;
        let mut sum = 0u64;
        for day in self.earliest.max(1)..=self.instance.horizon_days() {
            for &slot in slots {
                for machine in 1..=self.instance.machine_count() {
                    if self.instance.is_available(machine, day, slot) && !self.occ.used(machine, day, slot) {
                        sum += day as u64;
                        left -= 1;
                        if left == 0 {
                            return Some(sum);
                        }
                    }
                }
            }
        }
        None
    }

    fn beats_best(&self, bound: u64) -> bool {
        self.best.as_ref().is_none_or(|(b, _)| bound < *b)
    }

    fn schedule_of(&self, path: &[(usize, usize, usize)]) -> Schedule {
        let mut schedule = Schedule::new();
        for (p, &(m, d, s)) in self.patients.iter().zip(path) {
            schedule.assign(Assignment::new(p.id.clone(), m, d, s));
        }
        schedule
    }
}

/// Minimizes total treatment days over complete schedules of the roster.
pub fn solve_exact_offline(instance: &Instance, limits: SearchLimits) -> ExactOutcome {
    let Some(mut search) = Search::new(instance, instance.patients(), Occupancy::for_instance(instance), 1, limits) else {
        return ExactOutcome::Infeasible { nodes_explored: 0 };
    };
    let end = search.run();
    let nodes_explored = search.nodes;
    match (search.best.take(), end) {
        (Some((objective, path)), end) => ExactOutcome::Feasible(OptimalResult {
            schedule: search.schedule_of(&path),
            objective,
            nodes_explored,
            proven_optimal: matches!(end, SearchEnd::Complete),
        }),
        (None, SearchEnd::Complete) => ExactOutcome::Infeasible { nodes_explored },
        (None, SearchEnd::Aborted) => ExactOutcome::Undecided { nodes_explored },
    }
}

/// Penalty value of a scenario that cannot be fully placed:
/// `(L+1) * sum of its patients' sessions`.
pub fn recourse_penalty(instance: &Instance, scenario: &Scenario) -> u64 {
    scenario.patients.iter().map(|p| instance.penalty_for(p.sessions)).sum()
}

/// Optimal recourse value of `scenario` on top of the fixed occupancy, or the
/// scenario penalty when its patients cannot all be placed.
pub fn solve_recourse(instance: &Instance, fixed: &Occupancy, scenario: &Scenario) -> u64 {
    solve_recourse_from(instance, fixed, scenario, 1)
}

/// As [`solve_recourse`], with scenario patients starting no earlier than `earliest_day`.
pub fn solve_recourse_from(instance: &Instance, fixed: &Occupancy, scenario: &Scenario, earliest_day: usize) -> u64 {
    if scenario.patients.is_empty() {
        return 0;
    }
    let Some(mut search) = Search::new(
        instance,
        &scenario.patients,
        fixed.clone(),
        earliest_day,
        SearchLimits::unlimited(),
    ) else {
        return recourse_penalty(instance, scenario);
    };
    search.run();
    match search.best {
        Some((q, _)) => q,
        None => recourse_penalty(instance, scenario),
    }
}

/// First-fit in the given patient order. Roster patients absent from `order`
/// are left unassigned.
pub fn greedy_first_fit(instance: &Instance, order: &[&str]) -> Result<Schedule> {
    let mut occ = Occupancy::for_instance(instance);
    let mut schedule = Schedule::new();
    for id in order {
        let patient = instance
            .patient(id)
            .ok_or_else(|| crate::error::Error::UnknownPatient((*id).to_owned()))?;
        match first_fit(instance, patient, &occ, 1) {
            Some(c) => {
                occ.occupy(c.machine, c.start_day, c.slot, patient.sessions);
                schedule.assign(c.to_assignment(&patient.id));
            }
            None => schedule.leave_unassigned(patient.id.clone()),
        }
    }
    for p in instance.patients() {
        if !order.contains(&p.id.as_str()) {
            schedule.leave_unassigned(p.id.clone());
        }
    }
    Ok(schedule)
}

pub fn greedy_in_roster_order(instance: &Instance) -> Schedule {
    let order: Vec<&str> = instance.patients().iter().map(|p| p.id.as_str()).collect();
    greedy_first_fit(instance, &order).expect("roster ids are known")
}
