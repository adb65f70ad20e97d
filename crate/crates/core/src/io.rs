//! JSON file formats for instances and schedules.
//!
//! Instance file:
//!
//! ```json
//! {"version":1, "machines":M, "horizon_days":L, "slots_per_day":T,
//!  "blocked":[[m,d,s], ...],
//!  "patients":[{"id":"P1","kind":"general","sessions":3,"allowed_slots":[],"release_day":1}, ...]}
//! ```
//!
//! Schedule file:
//!
//! ```json
//! {"version":1, "instance_id":"...", "assignments":[{"id":"P1","machine":1,"start_day":1,"slot":2}],
//!  "unassigned":["P7"]}
//! ```
//!
//! Every index is 1-based. Writers emit pretty-printed JSON with a fixed key
//! order and a trailing newline, so saving a loaded canonical file reproduces
//! it byte for byte.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance, Patient, PatientKind, Schedule};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct PatientRecord {
    pub id: String,
    pub kind: PatientKind,
    pub sessions: usize,
    #[serde(default)]
    pub allowed_slots: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_day: Option<usize>,
}

impl PatientRecord {
    pub(crate) fn from_patient(p: &Patient, with_release: bool) -> Self {
        PatientRecord {
            id: p.id.clone(),
            kind: p.kind,
            sessions: p.sessions,
            allowed_slots: p.allowed_slots.iter().copied().collect(),
            release_day: with_release.then_some(p.release_day),
        }
    }

    pub(crate) fn into_patient(self) -> Patient {
        Patient {
            id: self.id,
            kind: self.kind,
            sessions: self.sessions,
            allowed_slots: self.allowed_slots.into_iter().collect(),
            release_day: self.release_day.unwrap_or(1),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    machines: usize,
    horizon_days: usize,
    slots_per_day: usize,
    #[serde(default)]
    blocked: Vec<[usize; 3]>,
    patients: Vec<PatientRecord>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    version: u64,
    #[serde(default)]
    instance_id: String,
    assignments: Vec<Assignment>,
    #[serde(default)]
    unassigned: Vec<String>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Parses a versioned JSON document, checking the schema version first.
pub(crate) fn parse_versioned<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    match probe.version {
        Some(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(parse_error(path, "missing field `version`")),
    }
    serde_json::from_str(text).map_err(|e| parse_error(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, to_canonical_json(value)).map_err(|e| Error::io(path, e))
}

pub fn instance_from_str(text: &str, origin: &Path) -> Result<Instance> {
    let file: InstanceFile = parse_versioned(text, origin)?;
    let mut inst = Instance::new(file.machines, file.horizon_days, file.slots_per_day);
    if let Some(id) = file.id {
        inst = inst.with_id(id);
    }
    for (i, [m, d, s]) in file.blocked.into_iter().enumerate() {
        inst = inst
            .with_blocked(m, d, s)
            .map_err(|e| parse_error(origin, format!("blocked[{i}]: {e}")))?;
    }
    Ok(inst.with_patients(file.patients.into_iter().map(PatientRecord::into_patient)))
}

pub fn instance_to_string(instance: &Instance) -> String {
    let file = InstanceFile {
        version: FORMAT_VERSION,
        id: instance.id().map(str::to_owned),
        machines: instance.machine_count(),
        horizon_days: instance.horizon_days(),
        slots_per_day: instance.slots_per_day(),
        blocked: instance.availability().blocked().into_iter().map(|(m, d, s)| [m, d, s]).collect(),
        patients: instance.patients().iter().map(|p| PatientRecord::from_patient(p, true)).collect(),
    };
    to_canonical_json(&file)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    instance_from_str(&read_text(path)?, path)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance_to_string(instance)).map_err(|e| Error::io(path, e))
}

/// The schedule file as a JSON value, so callers can attach extra members
/// (the CLI adds a `run` object) before writing.
pub fn schedule_document(schedule: &Schedule, instance_id: &str) -> serde_json::Value {
    let file = ScheduleFile {
        version: FORMAT_VERSION,
        instance_id: instance_id.to_owned(),
        assignments: schedule.assignments.values().cloned().collect(),
        unassigned: schedule.unassigned.clone(),
    };
    serde_json::to_value(file).expect("serializable schedule")
}

/// Parses a schedule and checks every id against `instance`'s roster.
pub fn schedule_from_str(text: &str, origin: &Path, instance: &Instance) -> Result<Schedule> {
    let file: ScheduleFile = parse_versioned(text, origin)?;
    let mut schedule = Schedule::new();
    for a in file.assignments {
        if schedule.assignments.contains_key(&a.patient_id) {
            return Err(Error::DuplicatePatient(a.patient_id));
        }
        schedule.assignments.insert(a.patient_id.clone(), a);
    }
    schedule.unassigned = file.unassigned;
    schedule.check_references(instance)?;
    Ok(schedule)
}

pub fn save_schedule(schedule: &Schedule, instance_id: &str, path: impl AsRef<Path>) -> Result<()> {
    write_json(path.as_ref(), &schedule_document(schedule, instance_id))
}

pub fn load_schedule(path: impl AsRef<Path>, instance: &Instance) -> Result<Schedule> {
    let path = path.as_ref();
    schedule_from_str(&read_text(path)?, path, instance)
}
