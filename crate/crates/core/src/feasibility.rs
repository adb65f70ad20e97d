//! Constraint checking and objective evaluation for the offline, online and
//! online-stochastic models.
//!
//! A sparse [`Schedule`] already encodes the normal form of the contiguity
//! and session-count constraints: one machine, one slot, `p` consecutive
//! days. [`check_constraints`] therefore reports double bookings (7a),
//! unavailable cells (7b), forbidden special slots (7c), missing patients
//! (7d), and horizon overflow. [`check_cells`] accepts the dense cell form
//! `X[i][j][l][t]` and additionally checks contiguity (7e) and cell domain (7f).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance, Occupancy, Patient, Schedule};
use crate::oracle::{recourse_penalty, solve_recourse_from};
use crate::scenario::{weighted_sum, Scenario, ScenarioSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "C7a_double_booking")]
    DoubleBooking,
    #[serde(rename = "C7b_unavailable")]
    Unavailable,
    #[serde(rename = "C7c_special_slot")]
    SpecialSlot,
    #[serde(rename = "C7d_session_count")]
    SessionCount,
    #[serde(rename = "C7e_contiguity")]
    Contiguity,
    #[serde(rename = "C7f_domain")]
    Domain,
    #[serde(rename = "horizon_overflow")]
    HorizonOverflow,
    #[serde(rename = "unassigned_patient")]
    UnassignedPatient,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DoubleBooking => "C7a_double_booking",
            ViolationCode::Unavailable => "C7b_unavailable",
            ViolationCode::SpecialSlot => "C7c_special_slot",
            ViolationCode::SessionCount => "C7d_session_count",
            ViolationCode::Contiguity => "C7e_contiguity",
            ViolationCode::Domain => "C7f_domain",
            ViolationCode::HorizonOverflow => "horizon_overflow",
            ViolationCode::UnassignedPatient => "unassigned_patient",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub patients: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub day: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, patients: Vec<String>, message: String) -> Self {
        Violation {
            code,
            patients,
            machine: None,
            day: None,
            slot: None,
            message,
        }
    }

    fn at(mut self, machine: usize, day: Option<usize>, slot: Option<usize>) -> Self {
        self.machine = Some(machine);
        self.day = day;
        self.slot = slot;
        self
    }
}

/// True when no violation other than `unassigned_patient` is present.
pub fn is_feasible_partial(violations: &[Violation]) -> bool {
    violations.iter().all(|v| v.code == ViolationCode::UnassignedPatient)
}

fn range_check(instance: &Instance, a: &Assignment) -> Result<()> {
    let checks = [
        ("machine", a.machine, instance.machine_count()),
        ("start_day", a.start_day, instance.horizon_days()),
        ("slot", a.slot, instance.slots_per_day()),
    ];
    for (what, value, max) in checks {
        if value == 0 || value > max {
            return Err(Error::OutOfRange { what, value, max });
        }
    }
    Ok(())
}

fn missing_patient_violations(instance: &Instance, placed: impl Fn(&str) -> bool, require_complete: bool) -> Vec<Violation> {
    instance
        .patients()
        .iter()
        .filter(|p| !placed(&p.id))
        .map(|p| {
            if require_complete {
                Violation::new(
                    ViolationCode::SessionCount,
                    vec![p.id.clone()],
                    format!("patient {} receives 0 of {} sessions", p.id, p.sessions),
                )
            } else {
                Violation::new(
                    ViolationCode::UnassignedPatient,
                    vec![p.id.clone()],
                    format!("patient {} is unassigned", p.id),
                )
            }
        })
        .collect()
}

/// Checks a sparse schedule against the offline model.
///
/// With `require_complete`, every roster patient must be placed and missing
/// ones are `C7d_session_count` violations; otherwise they are reported as
/// `unassigned_patient`. Out-of-range indices and unknown ids are errors,
/// not violations.
pub fn check_constraints(instance: &Instance, schedule: &Schedule, require_complete: bool) -> Result<Vec<Violation>> {
    schedule.check_references(instance)?;
    let horizon = instance.horizon_days();
    let mut out = Vec::new();
    let mut cells: BTreeMap<(usize, usize, usize), Vec<String>> = BTreeMap::new();
    for p in instance.patients() {
        let Some(a) = schedule.get(&p.id) else { continue };
        range_check(instance, a)?;
        let last = a.end_day(p.sessions);
        if last > horizon {
            out.push(
                Violation::new(
                    ViolationCode::HorizonOverflow,
                    vec![p.id.clone()],
                    format!(
                        "patient {} needs days {}..={} but the horizon ends at day {horizon}",
                        p.id, a.start_day, last
                    ),
                )
                .at(a.machine, Some(a.start_day), Some(a.slot)),
            );
        }
        if !p.accepts_slot(a.slot) {
            out.push(
                Violation::new(
                    ViolationCode::SpecialSlot,
                    vec![p.id.clone()],
                    format!("special patient {} is not allowed in slot {}", p.id, a.slot),
                )
                .at(a.machine, None, Some(a.slot)),
            );
        }
        for d in a.start_day..=last.min(horizon) {
            if !instance.is_available(a.machine, d, a.slot) {
                out.push(
                    Violation::new(
                        ViolationCode::Unavailable,
                        vec![p.id.clone()],
                        format!("machine {} is unavailable on day {d} slot {}", a.machine, a.slot),
                    )
                    .at(a.machine, Some(d), Some(a.slot)),
                );
            }
            cells.entry((a.machine, d, a.slot)).or_default().push(p.id.clone());
        }
    }
    for ((m, d, s), ids) in cells {
        if ids.len() > 1 {
            out.push(
                Violation::new(
                    ViolationCode::DoubleBooking,
                    ids.clone(),
                    format!("machine {m} day {d} slot {s} is booked by {}", ids.join(", ")),
                )
                .at(m, Some(d), Some(s)),
            );
        }
    }
    out.extend(missing_patient_violations(instance, |id| schedule.get(id).is_some(), require_complete));
    Ok(out)
}

/// One cell with `X = 1` in the dense decision matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub patient: String,
    pub machine: usize,
    pub day: usize,
    pub slot: usize,
}

/// Checks a dense cell listing against the offline model.
///
/// Each patient must use exactly one machine with `p` cells in total (7c/7d),
/// all in allowed slots, with exactly two on/off transitions along the day
/// axis summed over slots, counting days `0` and `L+1` as zero (7e). Cells
/// outside the grid or listed twice violate the binary domain (7f).
pub fn check_cells(instance: &Instance, cells: &[Cell], require_complete: bool) -> Result<Vec<Violation>> {
    let (machines, horizon, slots) = (instance.machine_count(), instance.horizon_days(), instance.slots_per_day());
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut by_patient: HashMap<&str, Vec<&Cell>> = HashMap::new();
    for c in cells {
        let patient = instance
            .patient(&c.patient)
            .ok_or_else(|| Error::UnknownPatient(c.patient.clone()))?;
        let in_grid = (1..=machines).contains(&c.machine) && (1..=horizon).contains(&c.day) && (1..=slots).contains(&c.slot);
        if !in_grid || !seen.insert(c.clone()) {
            out.push(
                Violation::new(
                    ViolationCode::Domain,
                    vec![c.patient.clone()],
                    format!("cell [{}, {}, {}] is outside the grid or set twice", c.machine, c.day, c.slot),
                )
                .at(c.machine, Some(c.day), Some(c.slot)),
            );
            continue;
        }
        by_patient.entry(patient.id.as_str()).or_default().push(c);
    }
    let mut occupancy: BTreeMap<(usize, usize, usize), Vec<String>> = BTreeMap::new();
    for p in instance.patients() {
        let Some(list) = by_patient.get(p.id.as_str()) else { continue };
        let used_machines: BTreeSet<usize> = list.iter().map(|c| c.machine).collect();
        if used_machines.len() != 1 || list.len() != p.sessions {
            out.push(Violation::new(
                ViolationCode::SessionCount,
                vec![p.id.clone()],
                format!(
                    "patient {} needs {} sessions on one machine, got {} cells on {} machines",
                    p.id,
                    p.sessions,
                    list.len(),
                    used_machines.len()
                ),
            ));
        }
        for c in list {
            if !p.accepts_slot(c.slot) {
                out.push(
                    Violation::new(
                        ViolationCode::SpecialSlot,
                        vec![p.id.clone()],
                        format!("special patient {} is not allowed in slot {}", p.id, c.slot),
                    )
                    .at(c.machine, Some(c.day), Some(c.slot)),
                );
            }
            if !instance.is_available(c.machine, c.day, c.slot) {
                out.push(
                    Violation::new(
                        ViolationCode::Unavailable,
                        vec![p.id.clone()],
                        format!("machine {} is unavailable on day {} slot {}", c.machine, c.day, c.slot),
                    )
                    .at(c.machine, Some(c.day), Some(c.slot)),
                );
            }
            occupancy.entry((c.machine, c.day, c.slot)).or_default().push(p.id.clone());
        }
        for &m in &used_machines {
            let set: BTreeSet<(usize, usize)> = list.iter().filter(|c| c.machine == m).map(|c| (c.day, c.slot)).collect();
            let transitions: usize = (1..=slots)
                .map(|t| {
                    (1..=horizon + 1)
                        .filter(|&l| set.contains(&(l, t)) != (l > 1 && set.contains(&(l - 1, t))))
                        .count()
                })
                .sum();
            if transitions != 2 {
                out.push(
                    Violation::new(
                        ViolationCode::Contiguity,
                        vec![p.id.clone()],
                        format!("patient {} has {transitions} on/off transitions on machine {m} (expected 2)", p.id),
                    )
                    .at(m, None, None),
                );
            }
        }
    }
    for ((m, d, s), ids) in occupancy {
        if ids.len() > 1 {
            out.push(
                Violation::new(
                    ViolationCode::DoubleBooking,
                    ids.clone(),
                    format!("machine {m} day {d} slot {s} is booked by {}", ids.join(", ")),
                )
                .at(m, Some(d), Some(s)),
            );
        }
    }
    out.extend(missing_patient_violations(instance, |id| by_patient.contains_key(id), require_complete));
    Ok(out)
}

/// Total treatment days `sum_j [p_j*start_j + p_j(p_j-1)/2]` of a complete schedule.
pub fn offline_objective(instance: &Instance, schedule: &Schedule) -> Result<u64> {
    schedule.check_references(instance)?;
    instance.patients().iter().try_fold(0u64, |acc, p| {
        let a = schedule.get(&p.id).ok_or_else(|| Error::PartialSchedule(p.id.clone()))?;
        Ok(acc + p.treatment_days(a.start_day))
    })
}

/// Offline objective of the placed patients plus `(L+1)*p` for every roster
/// patient the schedule leaves out.
pub fn penalized_objective(instance: &Instance, schedule: &Schedule) -> Result<u64> {
    schedule.check_references(instance)?;
    Ok(instance
        .patients()
        .iter()
        .map(|p| match schedule.get(&p.id) {
            Some(a) => p.treatment_days(a.start_day),
            None => instance.penalty_for(p.sessions),
        })
        .sum())
}

/// The offline summand of the pending patient alone.
pub fn online_objective(instance: &Instance, schedule: &Schedule, pending_id: &str) -> Result<u64> {
    let patient = instance
        .patient(pending_id)
        .ok_or_else(|| Error::UnknownPatient(pending_id.to_owned()))?;
    let a = schedule
        .get(pending_id)
        .ok_or_else(|| Error::PendingUnassigned(pending_id.to_owned()))?;
    Ok(patient.treatment_days(a.start_day))
}

/// How the recourse term of the online-stochastic objective is evaluated.
#[derive(Clone, Copy, Debug)]
pub enum Recourse<'a> {
    /// Optimal recourse per scenario.
    Exact,
    /// The supplied per-scenario schedules, in scenario order.
    Encoded(&'a [Schedule]),
}

/// Value of a supplied recourse schedule for one scenario, with the
/// incumbent occupancy fixed. Any infeasibility (a patient left out, a
/// conflict with the incumbent or within the scenario, an unavailable cell,
/// a forbidden slot, a start before `earliest_day` or past the horizon)
/// yields [`recourse_penalty`].
pub fn encoded_recourse_value(
    instance: &Instance,
    fixed: &Occupancy,
    scenario: &Scenario,
    schedule: &Schedule,
    earliest_day: usize,
) -> Result<u64> {
    for id in schedule.assignments.keys() {
        if !scenario.patients.iter().any(|p| &p.id == id) {
            return Err(Error::UnknownPatient(id.clone()));
        }
    }
    let mut occ = fixed.clone();
    let mut total = 0;
    for p in &scenario.patients {
        let Some(a) = schedule.get(&p.id) else {
            return Ok(recourse_penalty(instance, scenario));
        };
        range_check(instance, a)?;
        let fits = a.start_day >= earliest_day
            && p.accepts_slot(a.slot)
            && crate::oracle::block_fits(instance, &occ, a.machine, a.start_day, a.slot, p.sessions);
        if !fits {
            return Ok(recourse_penalty(instance, scenario));
        }
        occ.occupy(a.machine, a.start_day, a.slot, p.sessions);
        total += p.treatment_days(a.start_day);
    }
    Ok(total)
}

/// `online term + sum_w prob(w) * Q_w`, where the incumbent `schedule` (all
/// earlier patients plus the pending one) is fixed and scenario patients may
/// not start before `earliest_day`.
pub fn os_objective(
    instance: &Instance,
    schedule: &Schedule,
    pending_id: &str,
    scenarios: &ScenarioSet,
    recourse: Recourse<'_>,
    earliest_day: usize,
) -> Result<BigRational> {
    let online = online_objective(instance, schedule, pending_id)?;
    let fixed = crate::instance::build_occupancy(instance, schedule)?;
    let qs: Vec<u64> = match recourse {
        Recourse::Exact => scenarios
            .scenarios
            .iter()
            .map(|s| solve_recourse_from(instance, &fixed, s, earliest_day))
            .collect(),
        Recourse::Encoded(encoded) => {
            if encoded.len() != scenarios.len() {
                return Err(Error::InvalidScenarios(format!(
                    "{} recourse schedules supplied for {} scenarios",
                    encoded.len(),
                    scenarios.len()
                )));
            }
            scenarios
                .scenarios
                .iter()
                .zip(encoded)
                .map(|(s, sched)| encoded_recourse_value(instance, &fixed, s, sched, earliest_day))
                .collect::<Result<_>>()?
        }
    };
    Ok(os_value(online, scenarios, &qs))
}

/// `online + sum_w prob(w) * qs[w]`.
pub fn os_value(online: u64, scenarios: &ScenarioSet, qs: &[u64]) -> BigRational {
    BigRational::from_integer(BigInt::from(online)) + weighted_sum(scenarios, qs)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaitingMetrics {
    pub total_waiting_days: u64,
    pub waiting_patients: usize,
    pub per_patient_wait: BTreeMap<String, u64>,
}

fn wait_of(instance: &Instance, p: &Patient, schedule: &Schedule) -> (u64, bool) {
    match schedule.get(&p.id) {
        Some(a) => ((a.start_day.saturating_sub(p.release_day)) as u64, false),
        None => ((instance.horizon_days() + 1).saturating_sub(p.release_day) as u64, true),
    }
}

/// Access delay per patient: `start - release` (never negative) for placed
/// patients, `L - release + 1` for unplaced ones, which also always count as
/// waiting.
pub fn waiting_metrics(instance: &Instance, schedule: &Schedule) -> WaitingMetrics {
    let mut m = WaitingMetrics::default();
    for p in instance.patients() {
        let (wait, unassigned) = wait_of(instance, p, schedule);
        m.total_waiting_days += wait;
        if wait > 0 || unassigned {
            m.waiting_patients += 1;
        }
        m.per_patient_wait.insert(p.id.clone(), wait);
    }
    m
}
