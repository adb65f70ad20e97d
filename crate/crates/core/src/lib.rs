//! Radiotherapy patient scheduling.
//!
//! Patients need `p` daily sessions on consecutive working days, at one fixed
//! slot on one machine. The library covers three problem variants:
//!
//! * offline: the whole roster is known and total treatment days are minimized;
//! * online: patients arrive one at a time and earlier appointments are frozen;
//! * online-stochastic: the online objective plus the expected optimal cost of
//!   placing future arrivals drawn from a finite scenario set.
//!
//! [`oracle`] holds the exact reference solvers and the first-fit greedy,
//! [`meta`] the genetic, firefly and wolf-pack metaheuristics sharing one
//! continuous encoding, [`replay`] the arrival-by-arrival driver and [`bench`]
//! the experiment harness.

pub mod bench;
pub mod error;
pub mod feasibility;
pub mod generate;
pub mod instance;
pub mod io;
pub mod meta;
pub mod oracle;
pub mod replay;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use feasibility::{
    check_cells, check_constraints, offline_objective, online_objective, os_objective, waiting_metrics, Cell, Recourse,
    Violation, ViolationCode, WaitingMetrics,
};
pub use generate::{generate_instance, InstanceConfig};
pub use instance::{
    build_occupancy, sessions_of, validate_instance, Assignment, Finding, FindingCode, Instance, Occupancy, Patient,
    PatientKind, Schedule, ValidationReport,
};
pub use io::{load_instance, load_schedule, save_instance, save_schedule};
pub use meta::{solve, Algorithm, DecodedSolution, Mode, Position, RunResult, SolveContext, SolverParams};
pub use oracle::{
    candidate_assignments, greedy_first_fit, solve_exact_offline, solve_recourse, Candidate, ExactOutcome,
    OptimalResult, SearchLimits,
};
pub use scenario::{
    expected_recourse, generate_scenarios, load_scenarios, save_scenarios, validate_scenarios, GeneratorConfig,
    Probability, ProbabilityMode, Scenario, ScenarioSet,
};
