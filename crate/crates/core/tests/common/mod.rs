#![allow(dead_code)]

use std::io::Write;

use rtsched_core::rng::{seeded, Draw};
use rtsched_core::{Assignment, Instance, Patient, Schedule};

/// Writes past libtest's output capture so the line lands in the log.
pub fn report(number: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("acceptance {number} [{verdict}] {name}: {detail}\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

pub struct Shape {
    pub patients: (usize, usize),
    pub machines: (usize, usize),
    pub days: (usize, usize),
    pub slots: (usize, usize),
    pub sessions_max: usize,
    pub blocked_max: usize,
}

pub const TINY: Shape = Shape {
    patients: (1, 4),
    machines: (1, 2),
    days: (1, 5),
    slots: (1, 2),
    sessions_max: 3,
    blocked_max: 3,
};

pub fn random_instance(shape: &Shape, seed: u64) -> Instance {
    let mut r = seeded(seed);
    let m = r.between(shape.machines.0, shape.machines.1);
    let l = r.between(shape.days.0, shape.days.1);
    let t = r.between(shape.slots.0, shape.slots.1);
    let n = r.between(shape.patients.0, shape.patients.1);
    let mut inst = Instance::new(m, l, t).with_id(format!("rand{seed}"));
    for k in 1..=n {
        let p = r.between(1, shape.sessions_max.min(l));
        let patient = if r.chance(0.5) {
            let mut slots: Vec<usize> = (1..=t).filter(|_| r.chance(0.5)).collect();
            if slots.is_empty() {
                slots.push(r.between(1, t));
            }
            Patient::special(format!("P{k}"), p, slots)
        } else {
            Patient::general(format!("P{k}"), p)
        };
        inst = inst.with_patient(patient);
    }
    for _ in 0..r.between(0, shape.blocked_max) {
        let (bm, bd, bs) = (r.between(1, m), r.between(1, l), r.between(1, t));
        inst = inst.with_blocked(bm, bd, bs).unwrap();
    }
    inst
}

/// Every `(machine, start_day, slot)` triple inside the index ranges,
/// including starts that run past the horizon.
pub fn all_triples(inst: &Instance) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for m in 1..=inst.machine_count() {
        for d in 1..=inst.horizon_days() {
            for s in 1..=inst.slots_per_day() {
                out.push((m, d, s));
            }
        }
    }
    out
}

/// Literal reading of the model: every patient placed once, all sessions
/// inside the horizon on available cells of an allowed slot, no cell shared.
pub fn literally_feasible(inst: &Instance, placement: &[Option<(usize, usize, usize)>]) -> bool {
    let mut used = std::collections::HashSet::new();
    for (patient, choice) in inst.patients().iter().zip(placement) {
        let Some((m, d, s)) = *choice else { return false };
        if d + patient.sessions - 1 > inst.horizon_days() {
            return false;
        }
        if patient.is_special() && !patient.allowed_slots.contains(&s) {
            return false;
        }
        for day in d..d + patient.sessions {
            if !inst.is_available(m, day, s) || !used.insert((m, day, s)) {
                return false;
            }
        }
    }
    true
}

pub fn cost(inst: &Instance, placement: &[Option<(usize, usize, usize)>]) -> u64 {
    inst.patients()
        .iter()
        .zip(placement)
        .map(|(p, c)| {
            let (_, d, _) = c.unwrap();
            (d..d + p.sessions).map(|x| x as u64).sum::<u64>()
        })
        .sum()
}

/// Cartesian-product enumeration. `None` when nothing is feasible.
pub fn brute_force(inst: &Instance) -> Option<u64> {
    let triples = all_triples(inst);
    let n = inst.patients().len();
    let mut idx = vec![0usize; n];
    let mut best: Option<u64> = None;
    loop {
        let placement: Vec<_> = idx.iter().map(|&i| Some(triples[i])).collect();
        if literally_feasible(inst, &placement) {
            let c = cost(inst, &placement);
            best = Some(best.map_or(c, |b| b.min(c)));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < triples.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn schedule_of(inst: &Instance, placement: &[Option<(usize, usize, usize)>]) -> Schedule {
    let mut s = Schedule::new();
    for (p, c) in inst.patients().iter().zip(placement) {
        if let Some((m, d, sl)) = *c {
            s.assign(Assignment::new(p.id.clone(), m, d, sl));
        }
    }
    s
}
