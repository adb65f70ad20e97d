//! Solution context and the position decoder.
//!
//! A position holds `2n` genes for `n` decision patients in canonical order:
//! genes `0..n` are start days in `[1, L]`, genes `n..2n` are slots in
//! `[1, T]`. Decoding rounds and clamps each pair, places patients in order,
//! repairs infeasible pairs towards the nearest feasible placement, and
//! charges `(L+1)*p` for every patient that cannot be placed at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::os_value;
use crate::instance::{build_occupancy, Assignment, Instance, Occupancy, Patient, Schedule};
use crate::oracle::{block_fits, recourse_penalty};
use crate::scenario::ScenarioSet;

use super::Position;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Offline,
    Online,
    Os,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    Roster,
    Pending,
    Scenario(usize),
}

/// Everything a solver needs to turn positions into schedules and objectives.
///
/// Decision patients, in gene order:
/// * offline: the roster, in roster order;
/// * online: the pending patient;
/// * online-stochastic: the pending patient, then every scenario's patients,
///   scenario by scenario in list order.
#[derive(Clone, Debug)]
pub struct SolveContext<'a> {
    instance: &'a Instance,
    mode: Mode,
    patients: Vec<(&'a Patient, Group)>,
    frozen: Schedule,
    base: Occupancy,
    pending: Option<&'a Patient>,
    scenarios: Option<&'a ScenarioSet>,
    earliest_day: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedSolution {
    /// Placements of the decision patients only.
    pub schedule: Schedule,
    /// One recourse schedule per scenario (online-stochastic mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scenario_schedules: Vec<Schedule>,
    pub penalty: f64,
    pub objective_with_penalty: f64,
}

impl<'a> SolveContext<'a> {
    pub fn offline(instance: &'a Instance) -> Self {
        SolveContext {
            instance,
            mode: Mode::Offline,
            patients: instance.patients().iter().map(|p| (p, Group::Roster)).collect(),
            frozen: Schedule::new(),
            base: Occupancy::for_instance(instance),
            pending: None,
            scenarios: None,
            earliest_day: 1,
        }
    }

    /// One pending patient on top of a frozen partial schedule. The pending
    /// patient may not start before `earliest_day`.
    pub fn online(instance: &'a Instance, frozen: &Schedule, pending_id: &str, earliest_day: usize) -> Result<Self> {
        let pending = instance
            .patient(pending_id)
            .ok_or_else(|| Error::UnknownPatient(pending_id.to_owned()))?;
        if frozen.get(pending_id).is_some() {
            return Err(Error::InvalidParams(format!("pending patient {pending_id} is already scheduled")));
        }
        let mut frozen = frozen.clone();
        frozen.unassigned.retain(|id| id != pending_id);
        let base = build_occupancy(instance, &frozen)?;
        Ok(SolveContext {
            instance,
            mode: Mode::Online,
            patients: vec![(pending, Group::Pending)],
            frozen,
            base,
            pending: Some(pending),
            scenarios: None,
            earliest_day: earliest_day.max(1),
        })
    }

    /// As [`SolveContext::online`], adding the scenario patients to the
    /// decision vector. Scenario patients also start no earlier than `earliest_day`.
    pub fn os(
        instance: &'a Instance,
        frozen: &Schedule,
        pending_id: &str,
        scenarios: &'a ScenarioSet,
        earliest_day: usize,
    ) -> Result<Self> {
        let mut ctx = SolveContext::online(instance, frozen, pending_id, earliest_day)?;
        ctx.mode = Mode::Os;
        for (k, s) in scenarios.scenarios.iter().enumerate() {
            ctx.patients.extend(s.patients.iter().map(|p| (p, Group::Scenario(k))));
        }
        ctx.scenarios = Some(scenarios);
        Ok(ctx)
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn frozen(&self) -> &Schedule {
        &self.frozen
    }

    pub fn pending_id(&self) -> Option<&str> {
        self.pending.map(|p| p.id.as_str())
    }

    pub fn scenarios(&self) -> Option<&'a ScenarioSet> {
        self.scenarios
    }

    pub fn earliest_day(&self) -> usize {
        self.earliest_day
    }

    /// Number of decision patients `n`; positions have `2n` genes.
    pub fn decision_count(&self) -> usize {
        self.patients.len()
    }

    pub fn gene_count(&self) -> usize {
        2 * self.patients.len()
    }

    /// Inclusive bounds of gene `i`.
    #[inline]
    pub fn gene_bounds(&self, i: usize) -> (f64, f64) {
        if i < self.patients.len() {
            (1.0, self.instance.horizon_days() as f64)
        } else {
            (1.0, self.instance.slots_per_day() as f64)
        }
    }

    pub fn clamp(&self, position: &mut Position) {
        for (i, g) in position.genes.iter_mut().enumerate() {
            let (lo, hi) = self.gene_bounds(i);
            *g = if g.is_nan() { lo } else { g.clamp(lo, hi) };
        }
    }

    /// Frozen assignments plus the decoded decision patients.
    pub fn full_schedule(&self, decoded: &DecodedSolution) -> Schedule {
        let mut s = self.frozen.clone();
        for a in decoded.schedule.assignments.values() {
            s.assign(a.clone());
        }
        for id in &decoded.schedule.unassigned {
            s.leave_unassigned(id.clone());
        }
        s
    }

    pub fn decode(&self, position: &Position) -> Result<DecodedSolution> {
        if position.genes.len() != self.gene_count() {
            return Err(Error::LengthMismatch {
                expected: self.gene_count(),
                got: position.genes.len(),
            });
        }
        Ok(self.decode_unchecked(position))
    }

    /// Places one patient from its gene pair. Returns `(machine, start, slot)`.
    fn place(&self, patient: &Patient, occ: &Occupancy, gene_start: f64, gene_slot: f64) -> Option<(usize, usize, usize)> {
        let horizon = self.instance.horizon_days();
        let slots = self.instance.slots_per_day();
        let p = patient.sessions;
        if p == 0 || p > horizon {
            return None;
        }
        let want_start = round_clamp(gene_start, horizon);
        let want_slot = round_clamp(gene_slot, slots);
        let first = self.earliest_day;
        let last = horizon - p + 1;
        if first > last {
            return None;
        }
        let machine_for = |start: usize, slot: usize| {
            (1..=self.instance.machine_count()).find(|&m| block_fits(self.instance, occ, m, start, slot, p))
        };
        if (first..=last).contains(&want_start) && patient.accepts_slot(want_slot) {
            if let Some(m) = machine_for(want_start, want_slot) {
                return Some((m, want_start, want_slot));
            }
        }
        // Repair: nearest start, then cheaper start, then nearest slot, then lower slot.
        let mut slot_order: Vec<usize> = (1..=slots).filter(|&s| patient.accepts_slot(s)).collect();
        slot_order.sort_by_key(|&s| (s.abs_diff(want_slot), s));
        let anchor = want_start.clamp(first, last);
        let span = (anchor - first).max(last - anchor);
        for d in 0..=span {
            let below = anchor.checked_sub(d).filter(|&s| s >= first);
            let above = Some(anchor + d).filter(|&s| d > 0 && s <= last);
            for start in [below, above].into_iter().flatten() {
                for &slot in &slot_order {
                    if let Some(m) = machine_for(start, slot) {
                        return Some((m, start, slot));
                    }
                }
            }
        }
        None
    }

    pub(crate) fn decode_unchecked(&self, position: &Position) -> DecodedSolution {
        let n = self.patients.len();
        let starts = &position.genes[..n];
        let slots = &position.genes[n..];
        let mut schedule = Schedule::new();
        let mut penalty = 0u64;
        let mut occ = self.base.clone();
        let mut objective = 0u64;

        let roster_or_pending = self.patients.iter().enumerate().take_while(|(_, (_, g))| !matches!(g, Group::Scenario(_)));
        let mut pending_term = None;
        let mut consumed = 0;
        for (i, &(patient, group)) in roster_or_pending {
            consumed = i + 1;
            match self.place(patient, &occ, starts[i], slots[i]) {
                Some((m, d, s)) => {
                    occ.occupy(m, d, s, patient.sessions);
                    schedule.assign(Assignment::new(patient.id.clone(), m, d, s));
                    let term = patient.treatment_days(d);
                    objective += term;
                    if group == Group::Pending {
                        pending_term = Some(term);
                    }
                }
                None => {
                    schedule.leave_unassigned(patient.id.clone());
                    penalty += self.instance.penalty_for(patient.sessions);
                }
            }
        }

        let (scenario_schedules, objective_with_penalty) = match (self.mode, self.scenarios) {
            (Mode::Os, Some(set)) => {
                let mut qs = Vec::with_capacity(set.len());
                let mut schedules = Vec::with_capacity(set.len());
                let mut i = consumed;
                for (k, scenario) in set.scenarios.iter().enumerate() {
                    let mut scen_occ = occ.clone();
                    let mut sched = Schedule::new();
                    let mut q = 0u64;
                    let mut complete = true;
                    while i < n && self.patients[i].1 == Group::Scenario(k) {
                        let patient = self.patients[i].0;
                        match self.place(patient, &scen_occ, starts[i], slots[i]) {
                            Some((m, d, s)) => {
                                scen_occ.occupy(m, d, s, patient.sessions);
                                sched.assign(Assignment::new(patient.id.clone(), m, d, s));
                                q += patient.treatment_days(d);
                            }
                            None => {
                                complete = false;
                                sched.leave_unassigned(patient.id.clone());
                                penalty += self.instance.penalty_for(patient.sessions);
                            }
                        }
                        i += 1;
                    }
                    qs.push(if complete { q } else { recourse_penalty(self.instance, scenario) });
                    schedules.push(sched);
                }
                let value = os_value(pending_term.unwrap_or(0), set, &qs);
                let value = num_traits::ToPrimitive::to_f64(&value).unwrap_or(f64::INFINITY);
                (schedules, value + penalty as f64)
            }
            _ => (Vec::new(), (objective + penalty) as f64),
        };

        DecodedSolution {
            schedule,
            scenario_schedules,
            penalty: penalty as f64,
            objective_with_penalty,
        }
    }

    /// Position whose genes point exactly at `schedule`'s placements of the
    /// decision patients (scenario patients at day 1, slot 1 unless given in
    /// `scenario_schedules`).
    pub fn encode(&self, schedule: &Schedule, scenario_schedules: &[Schedule]) -> Position {
        let n = self.patients.len();
        let mut genes = vec![1.0; 2 * n];
        for (i, &(p, group)) in self.patients.iter().enumerate() {
            let source = match group {
                Group::Scenario(k) => scenario_schedules.get(k),
                _ => Some(schedule),
            };
            if let Some(a) = source.and_then(|s| s.get(&p.id)) {
                genes[i] = a.start_day as f64;
                genes[n + i] = a.slot as f64;
            }
        }
        Position { genes }
    }
}

#[inline]
fn round_clamp(gene: f64, max: usize) -> usize {
    let r = gene.round();
    if r.is_nan() || r < 1.0 {
        1
    } else if r > max as f64 {
        max
    } else {
        r as usize
    }
}
