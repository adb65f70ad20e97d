//! Experiment harness: seeded repetitions over a suite of cases, per-group
//! summaries and report files.
//!
//! A suite directory holds `suite.json` plus the instance and scenario files
//! it names. Cases with a scenario set are run as online-stochastic replays
//! (patients arrive by release day); the rest are solved offline.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{penalized_objective, waiting_metrics};
use crate::generate::{generate_instance, InstanceConfig};
use crate::instance::{Instance, Schedule};
use crate::io::{self, parse_versioned, read_text, write_json, FORMAT_VERSION};
use crate::meta::{self, convergence_iteration, SolveContext, SolverParams};
use crate::oracle::{greedy_in_roster_order, solve_exact_offline, ExactOutcome, SearchLimits};
use crate::replay::{replay, ArrivalOrder, ReplayConfig, ReplayMode, Strategy};
use crate::scenario::{generate_scenarios, load_scenarios, save_scenarios, GeneratorConfig, ProbabilityMode, ScenarioSet};

pub const SUITE_FILE: &str = "suite.json";
pub const RUNS_FILE: &str = "runs.json";

#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub tag: String,
    pub group: String,
    pub instance: Instance,
    pub scenarios: Option<ScenarioSet>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub cases: Vec<Case>,
    pub repetitions: usize,
    pub seed_base: u64,
}

#[derive(Serialize, Deserialize)]
struct CaseEntry {
    tag: String,
    group: String,
    instance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenarios: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SuiteFile {
    version: u64,
    repetitions: usize,
    seed_base: u64,
    cases: Vec<CaseEntry>,
}

impl Suite {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidParams("repetitions must be at least 1".into()));
        }
        let mut tags = BTreeSet::new();
        for case in &self.cases {
            if !tags.insert(case.tag.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate case tag {}", case.tag)));
            }
            if let Some(f) = crate::instance::validate_instance(&case.instance).first() {
                return Err(Error::InvalidInstance(format!("case {}: {}", case.tag, f.message)));
            }
            if let Some(set) = &case.scenarios {
                if let Some(f) = crate::scenario::validate_scenarios(set, &case.instance).first() {
                    return Err(Error::InvalidScenarios(format!("case {}: {}", case.tag, f.message)));
                }
            }
        }
        Ok(())
    }
}

pub fn load_suite(dir: impl AsRef<Path>) -> Result<Suite> {
    let dir = dir.as_ref();
    let path = dir.join(SUITE_FILE);
    let file: SuiteFile = parse_versioned(&read_text(&path)?, &path)?;
    let cases = file
        .cases
        .into_iter()
        .map(|c| {
            Ok(Case {
                instance: io::load_instance(dir.join(&c.instance))?,
                scenarios: c.scenarios.map(|s| load_scenarios(dir.join(s))).transpose()?,
                tag: c.tag,
                group: c.group,
            })
        })
        .collect::<Result<_>>()?;
    let suite = Suite {
        cases,
        repetitions: file.repetitions,
        seed_base: file.seed_base,
    };
    suite.validate()?;
    Ok(suite)
}

/// Writes `suite.json` and `<tag>.instance.json` / `<tag>.scenarios.json`.
pub fn save_suite(suite: &Suite, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for c in &suite.cases {
        let instance = format!("{}.instance.json", c.tag);
        io::save_instance(&c.instance, dir.join(&instance))?;
        let scenarios = match &c.scenarios {
            Some(set) => {
                let name = format!("{}.scenarios.json", c.tag);
                save_scenarios(set, dir.join(&name))?;
                Some(name)
            }
            None => None,
        };
        entries.push(CaseEntry {
            tag: c.tag.clone(),
            group: c.group.clone(),
            instance,
            scenarios,
        });
    }
    write_json(
        &dir.join(SUITE_FILE),
        &SuiteFile {
            version: FORMAT_VERSION,
            repetitions: suite.repetitions,
            seed_base: suite.seed_base,
            cases: entries,
        },
    )
}

/// `count` generated cases named `<prefix>-01..`, each with its own forecast.
/// Case `k` uses seeds `seed + k` for the instance and `seed + 1000 + k` for
/// the scenarios.
pub fn forecast_suite(
    prefix: &str,
    group: &str,
    count: usize,
    instance: &InstanceConfig,
    forecast: &GeneratorConfig,
    seed: u64,
) -> Result<Suite> {
    let cases = (1..=count as u64)
        .map(|k| {
            let tag = format!("{prefix}-{k:02}");
            let inst = generate_instance(instance, seed + k)?.with_id(tag.clone());
            let scenarios = generate_scenarios(&inst, forecast, seed + 1000 + k)?;
            Ok(Case {
                tag,
                group: group.to_owned(),
                instance: inst,
                scenarios: Some(scenarios),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Suite {
        cases,
        repetitions: 1,
        seed_base: 1,
    })
}

pub fn table2_instance_config() -> InstanceConfig {
    InstanceConfig {
        patients: 10,
        machines: 1,
        days: 30,
        slots: 2,
        special_ratio: 0.5,
        sessions: (1, 4),
        release_max: 20,
        special_slots_pool: vec![1],
    }
}

pub fn table2_forecast_config() -> GeneratorConfig {
    GeneratorConfig {
        scenario_count: 4,
        patients_per_scenario: (1, 2),
        special_ratio: 0.5,
        sessions_range: (1, 4),
        slots_pool: vec![1],
        probability_mode: ProbabilityMode::DirichletLikeRandom,
    }
}

/// Thirty 10-patient cases with 4-scenario forecasts. Special patients need
/// slot 1 and the forecasts are drawn from the arrivals' patient distribution.
pub fn table2_suite() -> Suite {
    forecast_suite("t2", "10", 30, &table2_instance_config(), &table2_forecast_config(), 1000)
        .expect("valid generator configs")
}

/// Ten offline cases in groups of 4, 8 and 10 patients.
pub fn desk_suite() -> Suite {
    let mut cases = Vec::new();
    for (group, patients, count) in [(4usize, 4usize, 3u64), (8, 8, 3), (10, 10, 4)] {
        for k in 1..=count {
            let tag = format!("d{patients:02}-{k}");
            let instance = generate_instance(
                &InstanceConfig {
                    patients,
                    machines: 2,
                    days: 10,
                    slots: 2,
                    special_ratio: 0.3,
                    sessions: (1, 4),
                    release_max: 5,
                    special_slots_pool: Vec::new(),
                },
                100 * patients as u64 + k,
            )
            .expect("valid generator config")
            .with_id(tag.clone());
            cases.push(Case {
                tag,
                group: group.to_string(),
                instance,
                scenarios: None,
            });
        }
    }
    Suite {
        cases,
        repetitions: 5,
        seed_base: 1,
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOptions {
    pub algorithms: Vec<Strategy>,
    pub params: SolverParams,
    pub parallel: bool,
    /// Record wall-clock runtimes. Timed outputs are not reproducible byte for byte.
    pub timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Strategy,
    pub case: String,
    pub group: String,
    pub seed: u64,
    /// Objective with penalties; absent when the run failed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `(objective - optimum) / max(1, optimum)` when the case optimum is known.
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    pub convergence_iteration: usize,
    pub iterations_run: usize,
    pub waiting_days: u64,
    pub waiting_patients: usize,
    pub infeasible: bool,
    pub trace: Vec<f64>,
    pub schedule: Schedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub version: u64,
    pub algorithms: Vec<Strategy>,
    pub groups: Vec<String>,
    pub optima: Vec<(String, u64)>,
    pub timing: bool,
    pub runs: Vec<RunRecord>,
}

struct Job<'a> {
    case: &'a Case,
    algorithm: Strategy,
    seed: u64,
}

struct Outcome {
    objective: f64,
    schedule: Schedule,
    trace: Vec<f64>,
    iterations_run: usize,
    runtime_ms: f64,
}

fn exact_optimum(case: &Case) -> Result<crate::oracle::OptimalResult> {
    match solve_exact_offline(&case.instance, SearchLimits::default()) {
        ExactOutcome::Feasible(r) => Ok(r),
        ExactOutcome::Infeasible { .. } => Err(Error::Infeasible("no complete schedule exists".into())),
        ExactOutcome::Undecided { nodes_explored } => Err(Error::InvalidParams(format!(
            "exact search undecided after {nodes_explored} nodes"
        ))),
    }
}

fn run_job(job: &Job<'_>, params: &SolverParams) -> Result<Outcome> {
    let started = std::time::Instant::now();
    let case = job.case;
    let inst = &case.instance;
    let (objective, schedule, trace) = match (job.algorithm, &case.scenarios) {
        (Strategy::Exact, None) => {
            let r = exact_optimum(case)?;
            (r.objective as f64, r.schedule, vec![r.objective as f64])
        }
        (Strategy::Greedy, None) => {
            let s = greedy_in_roster_order(inst);
            let obj = penalized_objective(inst, &s)? as f64;
            (obj, s, vec![obj])
        }
        (Strategy::Meta(a), None) => {
            let ctx = SolveContext::offline(inst);
            let run = meta::solve(a, &ctx, params, job.seed)?;
            (run.best_objective, ctx.full_schedule(&run.best), run.trace)
        }
        (strategy, Some(set)) => {
            let mode = if strategy == Strategy::Greedy { ReplayMode::Online } else { ReplayMode::Os };
            let out = replay(
                inst,
                &ReplayConfig {
                    strategy,
                    mode,
                    order: ArrivalOrder::Release,
                    scenarios: Some(set),
                    params,
                    seed: job.seed,
                },
            )?;
            (out.objective as f64, out.schedule, out.trace)
        }
    };
    Ok(Outcome {
        objective,
        schedule,
        iterations_run: trace.len().saturating_sub(1),
        trace,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every algorithm on every case: stochastic algorithms once per
/// repetition `k` with seed `seed_base + k`, greedy and exact once with seed
/// `seed_base`. Solver errors are recorded per run.
pub fn run_experiment(suite: &Suite, options: &ExperimentOptions) -> Result<ExperimentResults> {
    suite.validate()?;
    for a in &options.algorithms {
        if let Strategy::Meta(m) = a {
            options.params.validate(*m)?;
        }
    }
    let mut jobs = Vec::new();
    for &algorithm in &options.algorithms {
        for case in &suite.cases {
            let reps = if algorithm.is_stochastic() { suite.repetitions } else { 1 };
            for k in 0..reps {
                jobs.push(Job {
                    case,
                    algorithm,
                    seed: suite.seed_base + k as u64,
                });
            }
        }
    }
    let optima: Vec<(String, u64)> = if options.algorithms.contains(&Strategy::Exact) {
        let solve = |c: &Case| {
            exact_optimum(c)
                .ok()
                .filter(|r| r.proven_optimal)
                .map(|r| (c.tag.clone(), r.objective))
        };
        if options.parallel {
            suite.cases.par_iter().filter_map(solve).collect()
        } else {
            suite.cases.iter().filter_map(solve).collect()
        }
    } else {
        Vec::new()
    };
    let outcomes: Vec<Result<Outcome>> = if options.parallel {
        jobs.par_iter().map(|j| run_job(j, &options.params)).collect()
    } else {
        jobs.iter().map(|j| run_job(j, &options.params)).collect()
    };
    let runs = jobs
        .iter()
        .zip(outcomes)
        .map(|(job, outcome)| record(job, outcome, &optima, options.timing))
        .collect();
    let mut groups: Vec<String> = Vec::new();
    for c in &suite.cases {
        if !groups.contains(&c.group) {
            groups.push(c.group.clone());
        }
    }
    Ok(ExperimentResults {
        version: FORMAT_VERSION,
        algorithms: options.algorithms.clone(),
        groups,
        optima,
        timing: options.timing,
        runs,
    })
}

fn record(job: &Job<'_>, outcome: Result<Outcome>, optima: &[(String, u64)], timing: bool) -> RunRecord {
    let case = job.case;
    let base = RunRecord {
        algorithm: job.algorithm,
        case: case.tag.clone(),
        group: case.group.clone(),
        seed: job.seed,
        objective: None,
        error: None,
        gap: None,
        runtime_ms: None,
        convergence_iteration: 0,
        iterations_run: 0,
        waiting_days: 0,
        waiting_patients: 0,
        infeasible: false,
        trace: Vec::new(),
        schedule: Schedule::new(),
    };
    match outcome {
        Err(e) => RunRecord {
            error: Some(e.to_string()),
            ..base
        },
        Ok(o) => {
            let waiting = waiting_metrics(&case.instance, &o.schedule);
            let optimum = optima.iter().find(|(t, _)| t == &case.tag).map(|(_, v)| *v as f64);
            RunRecord {
                objective: Some(o.objective),
                gap: optimum.map(|opt| (o.objective - opt) / opt.max(1.0)),
                runtime_ms: timing.then_some(o.runtime_ms),
                convergence_iteration: convergence_iteration(&o.trace),
                iterations_run: o.iterations_run,
                waiting_days: waiting.total_waiting_days,
                waiting_patients: waiting.waiting_patients,
                infeasible: case.instance.patients().iter().any(|p| o.schedule.get(&p.id).is_none()),
                trace: o.trace,
                schedule: o.schedule,
                ..base
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Strategy,
    pub case_group: String,
    pub runs: usize,
    pub failures: usize,
    pub best: Option<f64>,
    pub avg: Option<f64>,
    pub worst: Option<f64>,
    pub gap_vs_exact: Option<f64>,
    pub mean_runtime_ms: Option<f64>,
    pub stddev_runtime_ms: Option<f64>,
    pub mean_convergence_iter: Option<f64>,
    pub waiting_days: Option<f64>,
    pub waiting_patients: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn stddev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    Some((values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt())
}

/// One row per (algorithm, group), in experiment order.
pub fn summarize(results: &ExperimentResults) -> Result<Vec<SummaryRow>> {
    if results.runs.is_empty() {
        return Err(Error::NothingToReport);
    }
    let mut rows = Vec::new();
    for &algorithm in &results.algorithms {
        for group in &results.groups {
            let runs: Vec<&RunRecord> = results
                .runs
                .iter()
                .filter(|r| r.algorithm == algorithm && &r.group == group)
                .collect();
            if runs.is_empty() {
                continue;
            }
            let ok: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.objective.is_some()).collect();
            let objectives: Vec<f64> = ok.iter().filter_map(|r| r.objective).collect();
            let gaps: Vec<f64> = ok.iter().filter_map(|r| r.gap).collect();
            let times: Vec<f64> = ok.iter().filter_map(|r| r.runtime_ms).collect();
            let conv: Vec<f64> = ok.iter().map(|r| r.convergence_iteration as f64).collect();
            let wd: Vec<f64> = ok.iter().map(|r| r.waiting_days as f64).collect();
            let wp: Vec<f64> = ok.iter().map(|r| r.waiting_patients as f64).collect();
            rows.push(SummaryRow {
                algorithm,
                case_group: group.clone(),
                runs: runs.len(),
                failures: runs.len() - ok.len(),
                best: objectives.iter().copied().reduce(f64::min),
                avg: mean(&objectives),
                worst: objectives.iter().copied().reduce(f64::max),
                gap_vs_exact: if gaps.len() == ok.len() { mean(&gaps) } else { None },
                mean_runtime_ms: mean(&times),
                stddev_runtime_ms: stddev(&times),
                mean_convergence_iter: mean(&conv),
                waiting_days: mean(&wd),
                waiting_patients: mean(&wp),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "algorithm",
    "case_group",
    "best",
    "avg",
    "worst",
    "gap_vs_exact",
    "mean_runtime_ms",
    "mean_convergence_iter",
    "waiting_days",
    "waiting_patients",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x}"))
}

fn fixed(v: Option<f64>, places: usize) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.places$}"))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let fields = [
            r.algorithm.to_string(),
            r.case_group.clone(),
            cell(r.best),
            cell(r.avg),
            cell(r.worst),
            cell(r.gap_vs_exact),
            cell(r.mean_runtime_ms),
            cell(r.mean_convergence_iter),
            cell(r.waiting_days),
            cell(r.waiting_patients),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,best_so_far\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// Mean waiting figures per algorithm over all groups.
pub fn waiting_by_algorithm(results: &ExperimentResults) -> Vec<(Strategy, f64, f64)> {
    results
        .algorithms
        .iter()
        .filter_map(|&a| {
            let ok: Vec<&RunRecord> = results
                .runs
                .iter()
                .filter(|r| r.algorithm == a && r.objective.is_some())
                .collect();
            let wd: Vec<f64> = ok.iter().map(|r| r.waiting_days as f64).collect();
            let wp: Vec<f64> = ok.iter().map(|r| r.waiting_patients as f64).collect();
            Some((a, mean(&wd)?, mean(&wp)?))
        })
        .collect()
}

pub fn summary_markdown(rows: &[SummaryRow], results: &ExperimentResults) -> String {
    let mut out = String::from("# Experiment report\n\n## Objective summary\n\n");
    out.push_str("| Algorithm | Group | Runs | Best | Avg | Worst | Gap vs exact | Mean runtime (ms) | Mean convergence iteration |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            r.algorithm,
            r.case_group,
            r.runs,
            fixed(r.best, 2),
            fixed(r.avg, 2),
            fixed(r.worst, 2),
            fixed(r.gap_vs_exact, 4),
            fixed(r.mean_runtime_ms, 1),
            fixed(r.mean_convergence_iter, 1),
        );
    }
    if !results.timing {
        out.push_str("\nRuntimes were not recorded (run with timing enabled to include them).\n");
    } else {
        out.push_str("\nRuntimes are wall-clock on this machine and only comparable within this report.\n");
    }
    out.push_str("\n## Comparison of present and OS scheduling\n\n");
    out.push_str("Waiting metrics are artifact-defined: waiting days sum `start - release` over patients ");
    out.push_str("(unplaced patients wait until the day after the horizon); waiting patients count those with a positive wait. ");
    out.push_str("Values are means per run.\n\n");
    out.push_str("| Algorithm | Waiting Days | Waiting Patients |\n|---|---|---|\n");
    for (a, wd, wp) in waiting_by_algorithm(results) {
        let _ = writeln!(out, "| {a} | {wd:.2} | {wp:.2} |");
    }
    out
}

fn trace_file_name(r: &RunRecord) -> String {
    format!("{}_{}_{}.csv", r.algorithm, r.case, r.seed)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `runs.json`, `traces/<algo>_<case>_<seed>.csv` and the summary in
/// `format` (`summary.csv`, `summary.json` or `report.md`). Returns the
/// written paths.
pub fn emit_report(results: &ExperimentResults, format: ReportFormat, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let rows = summarize(results)?;
    let dir = out_dir.as_ref();
    let mut written = Vec::new();
    let runs = dir.join(RUNS_FILE);
    write_json(&runs, results)?;
    written.push(runs);
    for r in &results.runs {
        if r.trace.is_empty() {
            continue;
        }
        let path = dir.join("traces").join(trace_file_name(r));
        write_text(&path, &trace_csv(&r.trace))?;
        written.push(path);
    }
    let path = match format {
        ReportFormat::Csv => {
            let p = dir.join("summary.csv");
            write_text(&p, &summary_csv(&rows))?;
            p
        }
        ReportFormat::Json => {
            let p = dir.join("summary.json");
            write_json(&p, &rows)?;
            p
        }
        ReportFormat::Md => {
            let p = dir.join("report.md");
            write_text(&p, &summary_markdown(&rows, results))?;
            p
        }
    };
    written.push(path);
    Ok(written)
}

pub fn load_results(dir: impl AsRef<Path>) -> Result<ExperimentResults> {
    let path = dir.as_ref().join(RUNS_FILE);
    parse_versioned(&read_text(&path)?, &path)
}
