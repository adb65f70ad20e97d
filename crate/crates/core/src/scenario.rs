//! Weighted future-arrival scenarios and the expected recourse term.
//!
//! A scenario set is an explicit finite list; the expectation over it is an
//! exact weighted sum in rational arithmetic.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instance::{patient_findings, Finding, FindingCode, Instance, Occupancy, Patient, ValidationReport};
use crate::io::{parse_versioned, read_text, write_json, PatientRecord, FORMAT_VERSION};
use crate::oracle::solve_recourse_from;
use crate::rng::{self, Draw};

/// Tolerance on the probability sum when any probability came from a
/// floating-point literal.
pub const FLOAT_SUM_TOLERANCE: f64 = 1e-9;

/// A scenario weight, held as an exact rational.
///
/// Decimal literals are converted through their shortest decimal spelling
/// (`0.1` becomes `1/10`), and remember that they came from a float so the
/// sum check can apply [`FLOAT_SUM_TOLERANCE`].
#[derive(Clone, Debug)]
pub struct Probability {
    value: BigRational,
    from_float: bool,
}

impl PartialEq for Probability {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Probability {
    pub fn ratio(num: i64, den: i64) -> Self {
        Probability {
            value: BigRational::new(BigInt::from(num), BigInt::from(den)),
            from_float: false,
        }
    }

    pub fn from_rational(value: BigRational) -> Self {
        Probability { value, from_float: false }
    }

    pub fn value(&self) -> &BigRational {
        &self.value
    }

    pub fn from_float(&self) -> bool {
        self.from_float
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    /// Parses `"num/den"`, an integer, or a decimal literal such as `0.25`
    /// or `2.5e-1`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(Probability::from_rational(BigRational::new(n, d)));
        }
        parse_decimal(text).map(|value| Probability { value, from_float: true })
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.value.is_integer() {
            write!(f, "{}", self.value.numer())
        } else {
            write!(f, "{}/{}", self.value.numer(), self.value.denom())
        }
    }
}

fn parse_decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        value = -value;
    }
    Some(value)
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(serde_json::Number),
        }
        let (text, from_number) = match Repr::deserialize(deserializer)? {
            Repr::Text(s) => (s, false),
            Repr::Number(n) => (n.to_string(), true),
        };
        let mut p = Probability::parse(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid probability `{text}`")))?;
        p.from_float |= from_number && !p.value.is_integer();
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub probability: Probability,
    /// Hypothetical future arrivals. Their `release_day` is not used.
    pub patients: Vec<Patient>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// `{(1, no patients)}`: the expectation term vanishes.
    pub fn certain_empty() -> Self {
        ScenarioSet {
            scenarios: vec![Scenario {
                id: "w0".into(),
                probability: Probability::ratio(1, 1),
                patients: Vec::new(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Total number of scenario patients over all scenarios.
    pub fn patient_count(&self) -> usize {
        self.scenarios.iter().map(|s| s.patients.len()).sum()
    }

    pub fn probability_sum(&self) -> BigRational {
        self.scenarios
            .iter()
            .fold(BigRational::zero(), |acc, s| acc + s.probability.value())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    /// Each scenario gets `1/n`.
    Uniform,
    /// Integer weights drawn uniformly from `1..=1000`, normalized exactly.
    DirichletLikeRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub scenario_count: usize,
    /// Inclusive `(min, max)` patients per scenario.
    pub patients_per_scenario: (usize, usize),
    pub special_ratio: f64,
    /// Inclusive `(min, max)` sessions per patient.
    pub sessions_range: (usize, usize),
    /// Slots special patients may be restricted to.
    pub slots_pool: Vec<usize>,
    pub probability_mode: ProbabilityMode,
}

impl GeneratorConfig {
    pub fn uniform(instance: &Instance, scenario_count: usize) -> Self {
        GeneratorConfig {
            scenario_count,
            patients_per_scenario: (1, 2),
            special_ratio: 0.3,
            sessions_range: (1, instance.horizon_days().min(3)),
            slots_pool: (1..=instance.slots_per_day()).collect(),
            probability_mode: ProbabilityMode::Uniform,
        }
    }

    fn check(&self, instance: &Instance) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.scenario_count == 0 {
            return bad("scenario_count must be at least 1".into());
        }
        let (pmin, pmax) = self.patients_per_scenario;
        if pmin > pmax {
            return bad(format!("empty patients_per_scenario range {pmin}..={pmax}"));
        }
        let (smin, smax) = self.sessions_range;
        if smin == 0 || smin > smax {
            return bad(format!("invalid sessions_range {smin}..={smax}"));
        }
        if smax > instance.horizon_days() {
            return bad(format!(
                "sessions_range maximum {smax} exceeds the horizon of {} days",
                instance.horizon_days()
            ));
        }
        if !(0.0..=1.0).contains(&self.special_ratio) {
            return bad(format!("special_ratio {} outside [0, 1]", self.special_ratio));
        }
        if self.special_ratio > 0.0 && self.slots_pool.is_empty() {
            return bad("slots_pool is empty but special patients may be generated".into());
        }
        if let Some(s) = self.slots_pool.iter().find(|&&s| s == 0 || s > instance.slots_per_day()) {
            return bad(format!("slots_pool contains slot {s} outside 1..={}", instance.slots_per_day()));
        }
        Ok(())
    }
}

/// Draws one patient: special with probability `special_ratio`; sessions
/// uniform in `sessions`; a special patient receives `c` distinct slots from
/// `pool`, `c` uniform in `1..=max(1, |pool|/2)`, picked by a partial
/// Fisher-Yates shuffle.
pub(crate) fn random_patient(
    rng: &mut rng::Rng,
    id: String,
    special_ratio: f64,
    sessions: (usize, usize),
    pool: &[usize],
) -> Patient {
    let special = rng.chance(special_ratio);
    let p = rng.between(sessions.0, sessions.1);
    if !special {
        return Patient::general(id, p);
    }
    let mut pool = pool.to_vec();
    let count = rng.between(1, (pool.len() / 2).max(1));
    for i in 0..count {
        let j = rng.between(i, pool.len() - 1);
        pool.swap(i, j);
    }
    Patient::special(id, p, pool.into_iter().take(count))
}

/// Deterministic scenario generation from one ChaCha8 stream.
///
/// Patients of scenario `k` are named `w{k}-{i}`. Probability weights are drawn
/// after all patients.
pub fn generate_scenarios(instance: &Instance, config: &GeneratorConfig, seed: u64) -> Result<ScenarioSet> {
    config.check(instance)?;
    let mut rng = rng::seeded(seed);
    let mut scenarios = Vec::with_capacity(config.scenario_count);
    for k in 1..=config.scenario_count {
        let n = rng.between(config.patients_per_scenario.0, config.patients_per_scenario.1);
        let patients = (1..=n)
            .map(|i| {
                random_patient(
                    &mut rng,
                    format!("w{k}-{i}"),
                    config.special_ratio,
                    config.sessions_range,
                    &config.slots_pool,
                )
            })
            .collect();
        scenarios.push(Scenario {
            id: format!("w{k}"),
            probability: Probability::ratio(1, 1),
            patients,
        });
    }
    let n = scenarios.len() as i64;
    match config.probability_mode {
        ProbabilityMode::Uniform => {
            for s in &mut scenarios {
                s.probability = Probability::ratio(1, n);
            }
        }
        ProbabilityMode::DirichletLikeRandom => {
            let weights: Vec<i64> = (0..n).map(|_| rng.between(1, 1000) as i64).collect();
            let total: i64 = weights.iter().sum();
            for (s, w) in scenarios.iter_mut().zip(weights) {
                s.probability = Probability::ratio(w, total);
            }
        }
    }
    Ok(ScenarioSet { scenarios })
}

/// Probability-sum, range, id and patient well-formedness findings.
pub fn validate_scenarios(set: &ScenarioSet, instance: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    let mut any_float = false;
    for s in &set.scenarios {
        any_float |= s.probability.from_float();
        if !ids.insert(s.id.as_str()) {
            out.push(Finding::new(FindingCode::DuplicateScenarioId, "duplicate scenario id").in_scenario(&s.id));
        }
        let p = s.probability.value();
        if !p.is_positive() || *p > BigRational::one() {
            out.push(
                Finding::new(
                    FindingCode::ProbabilityOutOfRange,
                    format!("probability {} outside (0, 1]", s.probability),
                )
                .in_scenario(&s.id),
            );
        }
        let mut patient_ids = HashSet::new();
        for patient in &s.patients {
            if !patient_ids.insert(patient.id.as_str()) {
                out.push(
                    Finding::new(FindingCode::DuplicatePatientId, "duplicate patient id")
                        .for_patient(&patient.id)
                        .in_scenario(&s.id),
                );
            }
            out.extend(
                patient_findings(patient, instance.horizon_days(), instance.slots_per_day())
                    .into_iter()
                    .map(|f| f.in_scenario(&s.id)),
            );
        }
    }
    let sum = set.probability_sum();
    let one = BigRational::one();
    let off = if any_float {
        ((&sum - &one).abs().to_f64().unwrap_or(f64::INFINITY)) > FLOAT_SUM_TOLERANCE
    } else {
        sum != one
    };
    if off {
        let deficit = &one - &sum;
        out.push(Finding::new(
            FindingCode::ProbabilitySum,
            format!(
                "probabilities sum to {} (deficit {})",
                sum.to_f64().unwrap_or(f64::NAN),
                deficit.to_f64().unwrap_or(f64::NAN)
            ),
        ));
    }
    out
}

/// `sum_w prob(w) * values[w]`, exactly.
pub fn weighted_sum(set: &ScenarioSet, values: &[u64]) -> BigRational {
    set.scenarios
        .iter()
        .zip(values)
        .fold(BigRational::zero(), |acc, (s, &q)| {
            acc + s.probability.value() * BigRational::from_integer(BigInt::from(q))
        })
}

/// `E[Q] = sum_w prob(w) * Q_w` with every `Q_w` solved to optimality on top
/// of `fixed`. Scenario patients may not start before `earliest_day`.
pub fn expected_recourse_from(
    instance: &Instance,
    fixed: &Occupancy,
    set: &ScenarioSet,
    earliest_day: usize,
) -> BigRational {
    let qs: Vec<u64> = set
        .scenarios
        .iter()
        .map(|s| solve_recourse_from(instance, fixed, s, earliest_day))
        .collect();
    weighted_sum(set, &qs)
}

pub fn expected_recourse(instance: &Instance, fixed: &Occupancy, set: &ScenarioSet) -> BigRational {
    expected_recourse_from(instance, fixed, set, 1)
}

#[derive(Serialize, Deserialize)]
struct ScenarioRecord {
    id: String,
    probability: Probability,
    #[serde(default)]
    patients: Vec<PatientRecord>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u64,
    scenarios: Vec<ScenarioRecord>,
}

pub fn scenarios_from_str(text: &str, origin: &Path) -> Result<ScenarioSet> {
    let file: ScenarioFile = parse_versioned(text, origin)?;
    Ok(ScenarioSet {
        scenarios: file
            .scenarios
            .into_iter()
            .map(|r| Scenario {
                id: r.id,
                probability: r.probability,
                patients: r.patients.into_iter().map(PatientRecord::into_patient).collect(),
            })
            .collect(),
    })
}

pub fn scenarios_to_value(set: &ScenarioSet) -> serde_json::Value {
    let file = ScenarioFile {
        version: FORMAT_VERSION,
        scenarios: set
            .scenarios
            .iter()
            .map(|s| ScenarioRecord {
                id: s.id.clone(),
                probability: s.probability.clone(),
                patients: s.patients.iter().map(|p| PatientRecord::from_patient(p, false)).collect(),
            })
            .collect(),
    };
    serde_json::to_value(file).expect("serializable scenarios")
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    scenarios_from_str(&read_text(path)?, path)
}

pub fn save_scenarios(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<()> {
    write_json(path.as_ref(), &scenarios_to_value(set))
}
