//! Arrival-by-arrival scheduling with frozen history.
//!
//! Patients arrive one at a time. Each arrival is placed on top of every
//! earlier decision, which is never revisited, and may not start before its
//! release day.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::penalized_objective;
use crate::instance::{build_occupancy, Assignment, Instance, Patient, Schedule};
use crate::meta::{self, convergence_iteration, Algorithm, SolveContext, SolverParams};
use crate::oracle::{candidate_assignments_from, first_fit};
use crate::rng::mix_seed;
use crate::scenario::{expected_recourse_from, ScenarioSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Earliest feasible placement, ignoring any forecast.
    Greedy,
    /// Best placement of the arrival: earliest start online, exact expected
    /// recourse in online-stochastic mode.
    Exact,
    #[serde(untagged)]
    Meta(Algorithm),
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Exact => "exact",
            Strategy::Meta(a) => a.as_str(),
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Strategy::Meta(_))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Strategy::Greedy),
            "exact" => Ok(Strategy::Exact),
            other => other.parse().map(Strategy::Meta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    Online,
    Os,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalOrder {
    /// Ascending release day, input order among ties.
    #[default]
    Release,
    Input,
}

pub fn arrival_order(instance: &Instance, order: ArrivalOrder) -> Vec<&Patient> {
    let mut patients: Vec<&Patient> = instance.patients().iter().collect();
    if order == ArrivalOrder::Release {
        patients.sort_by_key(|p| p.release_day);
    }
    patients
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// 1-based arrival index.
    pub arrival: usize,
    pub patient_id: String,
    pub assignment: Option<Assignment>,
    /// The arrival's own treatment-day term, or its penalty when unplaced.
    pub online_term: u64,
    /// Objective the strategy minimized for this arrival.
    pub objective: f64,
    /// Convergence iteration of the arrival's solver run.
    pub convergence_iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub strategy: Strategy,
    pub mode: ReplayMode,
    pub schedule: Schedule,
    pub decisions: Vec<Decision>,
    /// Schedule after each arrival.
    #[serde(skip)]
    pub snapshots: Vec<Schedule>,
    /// Total treatment days of the final schedule plus unplaced penalties.
    pub objective: u64,
    /// Element-wise sum of the per-arrival solver traces.
    pub trace: Vec<f64>,
    pub convergence_iteration: usize,
    pub evaluations: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

pub struct ReplayConfig<'a> {
    pub strategy: Strategy,
    pub mode: ReplayMode,
    pub order: ArrivalOrder,
    /// Standing forecast used at every arrival in online-stochastic mode.
    pub scenarios: Option<&'a ScenarioSet>,
    pub params: &'a SolverParams,
    pub seed: u64,
}

pub fn replay(instance: &Instance, config: &ReplayConfig<'_>) -> Result<ReplayOutcome> {
    let scenarios = match (config.mode, config.scenarios) {
        (ReplayMode::Os, None) => {
            return Err(Error::InvalidParams("online-stochastic replay needs a scenario set".into()))
        }
        (ReplayMode::Os, s) => s,
        (ReplayMode::Online, _) => None,
    };
    if let Strategy::Meta(a) = config.strategy {
        config.params.validate(a)?;
    }
    let started = Instant::now();
    let mut schedule = Schedule::new();
    let mut decisions = Vec::new();
    let mut snapshots = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut evaluations = 0;

    for (k, patient) in arrival_order(instance, config.order).into_iter().enumerate() {
        let step = place_arrival(
            instance,
            &schedule,
            patient,
            config.strategy,
            scenarios,
            config.params,
            mix_seed(config.seed, k as u64),
        )?;
        evaluations += step.evaluations;
        add_traces(&mut trace, &step.trace);
        let online_term = match &step.assignment {
            Some(a) => patient.treatment_days(a.start_day),
            None => instance.penalty_for(patient.sessions),
        };
        match &step.assignment {
            Some(a) => schedule.assign(a.clone()),
            None => schedule.leave_unassigned(patient.id.clone()),
        }
        decisions.push(Decision {
            arrival: k + 1,
            patient_id: patient.id.clone(),
            assignment: step.assignment,
            online_term,
            objective: step.objective,
            convergence_iteration: convergence_iteration(&step.trace),
        });
        snapshots.push(schedule.clone());
    }

    Ok(ReplayOutcome {
        strategy: config.strategy,
        mode: config.mode,
        objective: penalized_objective(instance, &schedule)?,
        schedule,
        decisions,
        snapshots,
        convergence_iteration: convergence_iteration(&trace),
        trace,
        evaluations,
        wall_time: started.elapsed(),
    })
}

/// One arrival's placement.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub assignment: Option<Assignment>,
    /// Objective the strategy minimized.
    pub objective: f64,
    pub trace: Vec<f64>,
    pub evaluations: u64,
}

/// Places `patient` on top of `schedule`, starting no earlier than its
/// release day. With `scenarios` the online-stochastic objective is used.
pub fn place_arrival(
    instance: &Instance,
    schedule: &Schedule,
    patient: &Patient,
    strategy: Strategy,
    scenarios: Option<&ScenarioSet>,
    params: &SolverParams,
    seed: u64,
) -> Result<Step> {
    let earliest = patient.release_day.max(1);
    match strategy {
        Strategy::Greedy => greedy_step(instance, schedule, patient, earliest),
        Strategy::Exact => exact_step(instance, schedule, patient, scenarios, earliest),
        Strategy::Meta(algorithm) => {
            let ctx = match scenarios {
                Some(set) => SolveContext::os(instance, schedule, &patient.id, set, earliest)?,
                None => SolveContext::online(instance, schedule, &patient.id, earliest)?,
            };
            let run = meta::solve(algorithm, &ctx, params, seed)?;
            Ok(Step {
                assignment: run.best.schedule.get(&patient.id).cloned(),
                objective: run.best_objective,
                trace: run.trace,
                evaluations: run.evaluations,
            })
        }
    }
}

/// Pads the shorter trace with its last value.
fn add_traces(total: &mut Vec<f64>, step: &[f64]) {
    if step.is_empty() {
        return;
    }
    let prev_last = total.last().copied().unwrap_or(0.0);
    let step_last = *step.last().unwrap();
    let len = total.len().max(step.len());
    let base = total.len();
    for i in 0..len {
        let s = step.get(i).copied().unwrap_or(step_last);
        if i < base {
            total[i] += s;
        } else {
            total.push(prev_last + s);
        }
    }
}

fn greedy_step(instance: &Instance, schedule: &Schedule, patient: &Patient, earliest: usize) -> Result<Step> {
    let occ = build_occupancy(instance, schedule)?;
    let assignment = first_fit(instance, patient, &occ, earliest).map(|c| c.to_assignment(&patient.id));
    let objective = match &assignment {
        Some(a) => patient.treatment_days(a.start_day),
        None => instance.penalty_for(patient.sessions),
    } as f64;
    Ok(Step {
        assignment,
        objective,
        trace: vec![objective],
        evaluations: 0,
    })
}

fn exact_step(
    instance: &Instance,
    schedule: &Schedule,
    patient: &Patient,
    scenarios: Option<&ScenarioSet>,
    earliest: usize,
) -> Result<Step> {
    let Some(set) = scenarios else {
        return greedy_step(instance, schedule, patient, earliest);
    };
    let occ = build_occupancy(instance, schedule)?;
    // Extra occupancy never lowers the recourse, so the recourse without the
    // arrival bounds every candidate from below.
    let floor = expected_recourse_from(instance, &occ, set, earliest);
    let mut best: Option<(BigRational, Assignment)> = None;
    for c in candidate_assignments_from(instance, patient, &occ, earliest) {
        let cost = BigRational::from_integer(c.cost.into());
        if best.as_ref().is_some_and(|(b, _)| &cost + &floor >= *b) {
            break;
        }
        let mut with = occ.clone();
        with.occupy(c.machine, c.start_day, c.slot, patient.sessions);
        let value = cost + expected_recourse_from(instance, &with, set, earliest);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, c.to_assignment(&patient.id)));
        }
    }
    Ok(match best {
        Some((value, a)) => {
            let objective = value.to_f64().unwrap_or(f64::INFINITY);
            Step {
                assignment: Some(a),
                objective,
                trace: vec![objective],
                evaluations: 0,
            }
        }
        None => {
            let objective = instance.penalty_for(patient.sessions) as f64;
            Step {
                assignment: None,
                objective,
                trace: vec![objective],
                evaluations: 0,
            }
        }
    })
}
