//! Synthetic instance generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::{self, Draw};
use crate::scenario::random_patient;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub patients: usize,
    pub machines: usize,
    pub days: usize,
    pub slots: usize,
    pub special_ratio: f64,
    /// Inclusive `(min, max)`.
    pub sessions: (usize, usize),
    /// Release days are uniform in `1..=release_max`.
    pub release_max: usize,
    /// Slots special patients draw their restrictions from; all slots when empty.
    pub special_slots_pool: Vec<usize>,
}

impl InstanceConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.machines == 0 || self.days == 0 || self.slots == 0 {
            return bad("machines, days and slots must all be at least 1".into());
        }
        let (lo, hi) = self.sessions;
        if lo == 0 || lo > hi {
            return bad(format!("invalid sessions range {lo}..={hi}"));
        }
        if hi > self.days {
            return bad(format!("sessions maximum {hi} exceeds the horizon of {} days", self.days));
        }
        if !(0.0..=1.0).contains(&self.special_ratio) {
            return bad(format!("special ratio {} outside [0, 1]", self.special_ratio));
        }
        if self.release_max == 0 || self.release_max > self.days {
            return bad(format!("release_max {} outside 1..={}", self.release_max, self.days));
        }
        if let Some(s) = self.special_slots_pool.iter().find(|&&s| s == 0 || s > self.slots) {
            return bad(format!("special slot pool contains {s} outside 1..={}", self.slots));
        }
        Ok(())
    }
}

/// Draws patients in sequence (kind, sessions, slots as in scenario
/// generation, then release day) from one ChaCha8 stream, orders them by
/// release day (stable), and names them `P1..Pn` in that order.
pub fn generate_instance(config: &InstanceConfig, seed: u64) -> Result<Instance> {
    config.check()?;
    let pool: Vec<usize> = if config.special_slots_pool.is_empty() {
        (1..=config.slots).collect()
    } else {
        config.special_slots_pool.clone()
    };
    let mut rng = rng::seeded(seed);
    let mut patients: Vec<_> = (0..config.patients)
        .map(|_| {
            let p = random_patient(&mut rng, String::new(), config.special_ratio, config.sessions, &pool);
            let release = rng.between(1, config.release_max);
            p.released_on(release)
        })
        .collect();
    patients.sort_by_key(|p| p.release_day);
    for (i, p) in patients.iter_mut().enumerate() {
        p.id = format!("P{}", i + 1);
    }
    Ok(Instance::new(config.machines, config.days, config.slots).with_patients(patients))
}
