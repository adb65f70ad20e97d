//! Problem data model: machines, working-day horizon, slot grid, patients,
//! assignments, schedules and their materialized occupancy.
//!
//! All indices in this module are 1-based (machine `1..=M`, day `1..=L`,
//! slot `1..=T`). Days are working days; weekends never appear in the
//! calendar, so consecutive indices are consecutive treatment days.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatientKind {
    /// Acceptable in any slot.
    General,
    /// Restricted to `allowed_slots`.
    Special,
}

impl PatientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatientKind::General => "general",
            PatientKind::Special => "special",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patient {
    pub id: String,
    pub kind: PatientKind,
    /// Number of daily sessions, delivered on consecutive days at one slot.
    pub sessions: usize,
    /// Permitted slots for special patients. Ignored for general patients.
    pub allowed_slots: BTreeSet<usize>,
    /// First day the patient may start. Only online replay and waiting
    /// metrics look at it.
    pub release_day: usize,
}

impl Patient {
    pub fn general(id: impl Into<String>, sessions: usize) -> Self {
        Patient {
            id: id.into(),
            kind: PatientKind::General,
            sessions,
            allowed_slots: BTreeSet::new(),
            release_day: 1,
        }
    }

    pub fn special(id: impl Into<String>, sessions: usize, slots: impl IntoIterator<Item = usize>) -> Self {
        Patient {
            id: id.into(),
            kind: PatientKind::Special,
            sessions,
            allowed_slots: slots.into_iter().collect(),
            release_day: 1,
        }
    }

    pub fn released_on(mut self, day: usize) -> Self {
        self.release_day = day;
        self
    }

    pub fn is_special(&self) -> bool {
        self.kind == PatientKind::Special
    }

    /// Whether the patient may be treated in `slot`.
    pub fn accepts_slot(&self, slot: usize) -> bool {
        match self.kind {
            PatientKind::General => true,
            PatientKind::Special => self.allowed_slots.contains(&slot),
        }
    }

    /// This patient's contribution to the total-treatment-days objective when
    /// starting on `start_day`: `start + (start+1) + ... + (start+p-1)`.
    pub fn treatment_days(&self, start_day: usize) -> u64 {
        treatment_days(self.sessions, start_day)
    }
}

/// `p*start + p(p-1)/2`, the sum of the day indices of `sessions`
/// consecutive sessions beginning on `start_day`.
pub fn treatment_days(sessions: usize, start_day: usize) -> u64 {
    let p = sessions as u64;
    p * start_day as u64 + p * p.saturating_sub(1) / 2
}

/// Per-(machine, day, slot) availability. `true` means schedulable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Availability {
    machines: usize,
    days: usize,
    slots: usize,
    cells: Vec<bool>,
}

impl Availability {
    pub fn all_available(machines: usize, days: usize, slots: usize) -> Self {
        Availability {
            machines,
            days,
            slots,
            cells: vec![true; machines * days * slots],
        }
    }

    fn index(&self, machine: usize, day: usize, slot: usize) -> Option<usize> {
        if machine == 0 || day == 0 || slot == 0 || machine > self.machines || day > self.days || slot > self.slots {
            return None;
        }
        Some(((machine - 1) * self.days + (day - 1)) * self.slots + (slot - 1))
    }

    pub fn is_available(&self, machine: usize, day: usize, slot: usize) -> bool {
        self.index(machine, day, slot).is_some_and(|i| self.cells[i])
    }

    /// Marks one cell unavailable.
    pub fn block(&mut self, machine: usize, day: usize, slot: usize) -> Result<()> {
        let i = self.index(machine, day, slot).ok_or_else(|| {
            Error::InvalidInstance(format!("blocked cell [{machine},{day},{slot}] is outside the grid"))
        })?;
        self.cells[i] = false;
        Ok(())
    }

    /// Blocked cells as `(machine, day, slot)` in lexicographic order.
    pub fn blocked(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for m in 1..=self.machines {
            for d in 1..=self.days {
                for s in 1..=self.slots {
                    if !self.is_available(m, d, s) {
                        out.push((m, d, s));
                    }
                }
            }
        }
        out
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.machines, self.days, self.slots)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    id: Option<String>,
    machine_count: usize,
    horizon_days: usize,
    slots_per_day: usize,
    availability: Availability,
    patients: Vec<Patient>,
}

impl Instance {
    /// An instance with every cell available and no patients.
    pub fn new(machine_count: usize, horizon_days: usize, slots_per_day: usize) -> Self {
        Instance {
            id: None,
            machine_count,
            horizon_days,
            slots_per_day,
            availability: Availability::all_available(machine_count, horizon_days, slots_per_day),
            patients: Vec::new(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_patient(mut self, patient: Patient) -> Self {
        self.patients.push(patient);
        self
    }

    pub fn with_patients(mut self, patients: impl IntoIterator<Item = Patient>) -> Self {
        self.patients.extend(patients);
        self
    }

    pub fn with_blocked(mut self, machine: usize, day: usize, slot: usize) -> Result<Self> {
        self.availability.block(machine, day, slot)?;
        Ok(self)
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn machine_count(&self) -> usize {
        self.machine_count
    }

    pub fn horizon_days(&self) -> usize {
        self.horizon_days
    }

    pub fn slots_per_day(&self) -> usize {
        self.slots_per_day
    }

    pub fn availability(&self) -> &Availability {
        &self.availability
    }

    pub fn is_available(&self, machine: usize, day: usize, slot: usize) -> bool {
        self.availability.is_available(machine, day, slot)
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn patient(&self, id: &str) -> Option<&Patient> {
        self.patients.iter().find(|p| p.id == id)
    }

    /// Same grid, different roster.
    pub fn with_roster(&self, patients: Vec<Patient>) -> Instance {
        Instance {
            patients,
            ..self.clone()
        }
    }

    /// Penalty charged for patients that cannot be placed: `(L+1)` per session.
    pub fn penalty_for(&self, sessions: usize) -> u64 {
        (self.horizon_days as u64 + 1) * sessions as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    #[serde(rename = "id")]
    pub patient_id: String,
    pub machine: usize,
    pub start_day: usize,
    pub slot: usize,
}

impl Assignment {
    pub fn new(patient_id: impl Into<String>, machine: usize, start_day: usize, slot: usize) -> Self {
        Assignment {
            patient_id: patient_id.into(),
            machine,
            start_day,
            slot,
        }
    }

    pub fn end_day(&self, sessions: usize) -> usize {
        self.start_day + sessions.saturating_sub(1)
    }
}

/// Expands an assignment into its `(day, slot)` session cells.
pub fn sessions_of(assignment: &Assignment, sessions: usize, horizon_days: usize) -> Result<Vec<(usize, usize)>> {
    if assignment.start_day == 0 || assignment.end_day(sessions) > horizon_days {
        return Err(Error::HorizonOverflow {
            patient: assignment.patient_id.clone(),
            start_day: assignment.start_day,
            sessions,
            horizon: horizon_days,
        });
    }
    Ok((assignment.start_day..assignment.start_day + sessions)
        .map(|d| (d, assignment.slot))
        .collect())
}

/// Sparse schedule: one assignment per placed patient plus the list of
/// patients left unplaced.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct Schedule {
    pub assignments: BTreeMap<String, Assignment>,
    pub unassigned: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    assignments: Vec<Assignment>,
    #[serde(default)]
    unassigned: Vec<String>,
}

impl From<ScheduleRepr> for Schedule {
    fn from(r: ScheduleRepr) -> Self {
        Schedule {
            assignments: r.assignments.into_iter().map(|a| (a.patient_id.clone(), a)).collect(),
            unassigned: r.unassigned,
        }
    }
}

impl From<Schedule> for ScheduleRepr {
    fn from(s: Schedule) -> Self {
        ScheduleRepr {
            assignments: s.assignments.into_values().collect(),
            unassigned: s.unassigned,
        }
    }
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn assign(&mut self, assignment: Assignment) {
        self.unassigned.retain(|id| *id != assignment.patient_id);
        self.assignments.insert(assignment.patient_id.clone(), assignment);
    }

    pub fn leave_unassigned(&mut self, id: impl Into<String>) {
        let id = id.into();
        self.assignments.remove(&id);
        if !self.unassigned.contains(&id) {
            self.unassigned.push(id);
        }
    }

    pub fn get(&self, id: &str) -> Option<&Assignment> {
        self.assignments.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty() && self.unassigned.is_empty()
    }

    /// Checks that every referenced id belongs to the roster and appears at
    /// most once.
    pub fn check_references(&self, instance: &Instance) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.assignments.keys().chain(self.unassigned.iter()) {
            if instance.patient(id).is_none() {
                return Err(Error::UnknownPatient(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicatePatient(id.clone()));
            }
        }
        Ok(())
    }
}

/// Materialized machine usage of a schedule.
///
/// `load(m, d, s)` counts the patients placed on a cell, so double bookings
/// remain visible; `count(d, s)` sums loads over machines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    machines: usize,
    days: usize,
    slots: usize,
    load: Vec<u16>,
}

impl Occupancy {
    pub fn empty(machines: usize, days: usize, slots: usize) -> Self {
        Occupancy {
            machines,
            days,
            slots,
            load: vec![0; machines * days * slots],
        }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Occupancy::empty(instance.machine_count, instance.horizon_days, instance.slots_per_day)
    }

    #[inline]
    fn index(&self, machine: usize, day: usize, slot: usize) -> usize {
        debug_assert!(machine >= 1 && machine <= self.machines);
        debug_assert!(day >= 1 && day <= self.days);
        debug_assert!(slot >= 1 && slot <= self.slots);
        ((machine - 1) * self.days + (day - 1)) * self.slots + (slot - 1)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.machines, self.days, self.slots)
    }

    pub fn load(&self, machine: usize, day: usize, slot: usize) -> u16 {
        self.load[self.index(machine, day, slot)]
    }

    pub fn used(&self, machine: usize, day: usize, slot: usize) -> bool {
        self.load(machine, day, slot) > 0
    }

    pub fn count(&self, day: usize, slot: usize) -> u32 {
        (1..=self.machines).map(|m| self.load(m, day, slot) as u32).sum()
    }

    pub fn total(&self) -> u64 {
        self.load.iter().map(|&c| c as u64).sum()
    }

    /// Whether `sessions` consecutive cells from `start_day` at `slot` on
    /// `machine` are unoccupied. The caller guarantees the block fits the horizon.
    #[inline]
    pub fn block_is_free(&self, machine: usize, start_day: usize, slot: usize, sessions: usize) -> bool {
        (start_day..start_day + sessions).all(|d| self.load[self.index(machine, d, slot)] == 0)
    }

    /// Adds one patient's block. The caller guarantees the block fits the grid.
    pub fn occupy(&mut self, machine: usize, start_day: usize, slot: usize, sessions: usize) {
        for d in start_day..start_day + sessions {
            let i = self.index(machine, d, slot);
            self.load[i] += 1;
        }
    }

    pub fn vacate(&mut self, machine: usize, start_day: usize, slot: usize, sessions: usize) {
        for d in start_day..start_day + sessions {
            let i = self.index(machine, d, slot);
            self.load[i] -= 1;
        }
    }

    /// Adds an assignment after range-checking it.
    pub fn add(&mut self, assignment: &Assignment, sessions: usize) -> Result<()> {
        if assignment.machine == 0 || assignment.machine > self.machines {
            return Err(Error::OutOfRange {
                what: "machine",
                value: assignment.machine,
                max: self.machines,
            });
        }
        if assignment.slot == 0 || assignment.slot > self.slots {
            return Err(Error::OutOfRange {
                what: "slot",
                value: assignment.slot,
                max: self.slots,
            });
        }
        if assignment.start_day == 0 || assignment.start_day > self.days {
            return Err(Error::OutOfRange {
                what: "start_day",
                value: assignment.start_day,
                max: self.days,
            });
        }
        sessions_of(assignment, sessions, self.days)?;
        self.occupy(assignment.machine, assignment.start_day, assignment.slot, sessions);
        Ok(())
    }
}

/// Builds the occupancy of `schedule` on `instance`'s grid.
pub fn build_occupancy(instance: &Instance, schedule: &Schedule) -> Result<Occupancy> {
    let mut occ = Occupancy::for_instance(instance);
    for a in schedule.assignments.values() {
        let patient = instance
            .patient(&a.patient_id)
            .ok_or_else(|| Error::UnknownPatient(a.patient_id.clone()))?;
        occ.add(a, patient.sessions)?;
    }
    Ok(occ)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    EmptyMachineSet,
    EmptyHorizon,
    EmptySlotGrid,
    DuplicatePatientId,
    ZeroSessions,
    SessionsExceedHorizon,
    SpecialWithoutSlots,
    SlotOutOfRange,
    ReleaseDayOutOfRange,
    DuplicateScenarioId,
    ProbabilityOutOfRange,
    ProbabilitySum,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        write!(f, "{}", s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

/// One structural problem in an instance or scenario set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patient: Option<String>,
    pub message: String,
}

impl Finding {
    pub(crate) fn new(code: FindingCode, message: impl Into<String>) -> Self {
        Finding {
            code,
            scenario: None,
            patient: None,
            message: message.into(),
        }
    }

    pub(crate) fn for_patient(mut self, id: &str) -> Self {
        self.patient = Some(id.to_owned());
        self
    }

    pub(crate) fn in_scenario(mut self, id: &str) -> Self {
        self.scenario = Some(id.to_owned());
        self
    }
}

/// Empty means valid.
pub type ValidationReport = Vec<Finding>;

/// Well-formedness findings for a single patient against a grid.
pub(crate) fn patient_findings(patient: &Patient, horizon_days: usize, slots_per_day: usize) -> Vec<Finding> {
    let mut out = Vec::new();
    let id = patient.id.as_str();
    if patient.sessions == 0 {
        out.push(Finding::new(FindingCode::ZeroSessions, "patient has zero sessions").for_patient(id));
    }
    if patient.sessions > horizon_days {
        out.push(
            Finding::new(
                FindingCode::SessionsExceedHorizon,
                format!("sessions exceed horizon ({} > {horizon_days})", patient.sessions),
            )
            .for_patient(id),
        );
    }
    if patient.is_special() {
        if patient.allowed_slots.is_empty() {
            out.push(Finding::new(FindingCode::SpecialWithoutSlots, "special patient has empty allowed_slots").for_patient(id));
        }
        for &s in &patient.allowed_slots {
            if s == 0 || s > slots_per_day {
                out.push(
                    Finding::new(
                        FindingCode::SlotOutOfRange,
                        format!("allowed slot {s} outside 1..={slots_per_day}"),
                    )
                    .for_patient(id),
                );
            }
        }
    }
    out
}

/// Reports every violated structural invariant of `instance`.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    if instance.machine_count == 0 {
        out.push(Finding::new(FindingCode::EmptyMachineSet, "machine_count must be at least 1"));
    }
    if instance.horizon_days == 0 {
        out.push(Finding::new(FindingCode::EmptyHorizon, "horizon_days must be at least 1"));
    }
    if instance.slots_per_day == 0 {
        out.push(Finding::new(FindingCode::EmptySlotGrid, "slots_per_day must be at least 1"));
    }
    let mut seen = HashSet::new();
    for p in &instance.patients {
        if !seen.insert(p.id.as_str()) {
            out.push(Finding::new(FindingCode::DuplicatePatientId, "duplicate patient id").for_patient(&p.id));
        }
        out.extend(patient_findings(p, instance.horizon_days, instance.slots_per_day));
        if p.release_day == 0 {
            out.push(Finding::new(FindingCode::ReleaseDayOutOfRange, "release_day must be at least 1").for_patient(&p.id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_patient_instance() -> Instance {
        Instance::new(1, 5, 2)
            .with_patient(Patient::general("P1", 2))
            .with_patient(Patient::special("P2", 3, [2]))
    }

    #[test]
    fn well_formed_instance_has_no_findings() {
        assert!(validate_instance(&two_patient_instance()).is_empty());
    }

    #[test]
    fn special_patient_without_slots_is_reported() {
        let inst = Instance::new(1, 5, 2).with_patient(Patient::special("S", 1, []));
        let report = validate_instance(&inst);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].code, FindingCode::SpecialWithoutSlots);
        assert_eq!(report[0].message, "special patient has empty allowed_slots");
        assert_eq!(report[0].patient.as_deref(), Some("S"));
    }

    #[test]
    fn sessions_beyond_horizon_are_reported() {
        let inst = Instance::new(1, 5, 2).with_patient(Patient::general("P", 6));
        let report = validate_instance(&inst);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].code, FindingCode::SessionsExceedHorizon);
        assert!(report[0].message.starts_with("sessions exceed horizon"));
    }

    #[test]
    fn structural_problems_are_all_listed() {
        let inst = Instance::new(0, 3, 2)
            .with_patient(Patient::general("A", 1))
            .with_patient(Patient::general("A", 1))
            .with_patient(Patient::special("B", 1, [3]).released_on(0));
        let codes: Vec<_> = validate_instance(&inst).into_iter().map(|f| f.code).collect();
        assert_eq!(
            codes,
            vec![
                FindingCode::EmptyMachineSet,
                FindingCode::DuplicatePatientId,
                FindingCode::SlotOutOfRange,
                FindingCode::ReleaseDayOutOfRange
            ]
        );
    }

    #[test]
    fn sessions_expand_to_consecutive_days() {
        let a = Assignment::new("P", 1, 2, 1);
        assert_eq!(sessions_of(&a, 3, 5).unwrap(), vec![(2, 1), (3, 1), (4, 1)]);
        let b = Assignment::new("P", 1, 1, 2);
        assert_eq!(sessions_of(&b, 1, 5).unwrap(), vec![(1, 2)]);
        let c = Assignment::new("P", 1, 4, 1);
        let err = sessions_of(&c, 3, 5).unwrap_err();
        assert!(err.to_string().contains("assignment exceeds horizon"));
    }

    #[test]
    fn occupancy_of_empty_schedule_is_zero() {
        let inst = two_patient_instance();
        let occ = build_occupancy(&inst, &Schedule::new()).unwrap();
        assert_eq!(occ.total(), 0);
    }

    #[test]
    fn occupancy_marks_session_cells() {
        let inst = two_patient_instance();
        let mut s = Schedule::new();
        s.assign(Assignment::new("P1", 1, 1, 1));
        let occ = build_occupancy(&inst, &s).unwrap();
        assert!(occ.used(1, 1, 1));
        assert!(occ.used(1, 2, 1));
        assert!(!occ.used(1, 3, 1));
        assert_eq!(occ.total(), 2);
        assert_eq!((1..=5).map(|d| (1..=2).map(|t| occ.count(d, t)).sum::<u32>()).sum::<u32>(), 2);
    }

    #[test]
    fn occupancy_counts_double_bookings() {
        let inst = Instance::new(1, 5, 2)
            .with_patient(Patient::general("A", 1))
            .with_patient(Patient::general("B", 1));
        let mut s = Schedule::new();
        s.assign(Assignment::new("A", 1, 1, 1));
        s.assign(Assignment::new("B", 1, 1, 1));
        let occ = build_occupancy(&inst, &s).unwrap();
        assert_eq!(occ.count(1, 1), 2);
    }

    #[test]
    fn occupancy_rejects_unknown_and_out_of_range() {
        let inst = two_patient_instance();
        let mut s = Schedule::new();
        s.assign(Assignment::new("ghost", 1, 1, 1));
        assert!(matches!(build_occupancy(&inst, &s), Err(Error::UnknownPatient(_))));
        let mut s = Schedule::new();
        s.assign(Assignment::new("P1", 2, 1, 1));
        assert!(matches!(build_occupancy(&inst, &s), Err(Error::OutOfRange { what: "machine", .. })));
    }

    #[test]
    fn treatment_days_is_an_arithmetic_series() {
        assert_eq!(treatment_days(3, 2), 2 + 3 + 4);
        assert_eq!(treatment_days(1, 1), 1);
        assert_eq!(treatment_days(2, 3), 3 + 4);
    }
}
