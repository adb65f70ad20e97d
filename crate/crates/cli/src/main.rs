//! `rtsched`: generate instances, solve, validate, replay arrivals, run
//! benchmarks and re-render reports.
//!
//! Exit codes: 0 success, 1 domain failure (a JSON error object on stdout),
//! 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rtsched_core::bench::{self, ExperimentOptions, ReportFormat};
use rtsched_core::io::{self, write_json};
use rtsched_core::meta::{self, SolveContext, SolverParams};
use rtsched_core::oracle::{greedy_in_roster_order, solve_exact_offline, ExactOutcome, SearchLimits};
use rtsched_core::replay::{self, place_arrival, ArrivalOrder, ReplayConfig, ReplayMode, Strategy};
use rtsched_core::scenario::{self, GeneratorConfig};
use rtsched_core::{check_constraints, waiting_metrics, Error, Instance, InstanceConfig, Schedule, ScenarioSet};

#[derive(Parser)]
#[command(name = "rtsched", version, about = "Radiotherapy patient scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance (and optionally a scenario set).
    Generate(GenerateArgs),
    /// Solve an instance offline, or place one pending patient.
    Solve(SolveArgs),
    /// Check a schedule against an instance.
    Validate(ValidateArgs),
    /// Schedule patients one arrival at a time.
    Replay(ReplayArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Re-render a report from stored runs.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    patients: usize,
    #[arg(long)]
    machines: usize,
    #[arg(long)]
    days: usize,
    #[arg(long)]
    slots: usize,
    #[arg(long, default_value_t = 0.3)]
    special_ratio: f64,
    #[arg(long, default_value_t = 1)]
    sessions_min: usize,
    #[arg(long)]
    sessions_max: usize,
    /// Release days are drawn from 1..=release-max.
    #[arg(long, default_value_t = 1)]
    release_max: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write a uniform scenario set with this many scenarios.
    #[arg(long, requires = "scenarios_out")]
    scenario_count: Option<usize>,
    #[arg(long)]
    scenarios_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMode {
    Offline,
    Os,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    algo: Strategy,
    #[arg(long, value_enum, default_value_t = SolveMode::Offline)]
    mode: SolveMode,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Solver parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Patient to place in `os` mode.
    #[arg(long)]
    pending: Option<String>,
    /// Schedule of already placed patients in `os` mode.
    #[arg(long)]
    frozen: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Accept schedules that leave patients out.
    #[arg(long)]
    partial: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Release,
    Input,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplayModeArg {
    Online,
    Os,
}

#[derive(clap::Args)]
struct ReplayArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = OrderArg::Release)]
    order: OrderArg,
    #[arg(long)]
    algo: Strategy,
    #[arg(long, value_enum, default_value_t = ReplayModeArg::Online)]
    mode: ReplayModeArg,
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Md,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Md => ReportFormat::Md,
        }
    }
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    /// Comma-separated: greedy, exact, ga, ffo, wo.
    #[arg(long, value_delimiter = ',', default_value = "greedy,exact,ga,ffo,wo")]
    algos: Vec<Strategy>,
    /// Overrides the suite's repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Overrides the suite's seed base.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long)]
    parallel: bool,
    /// Record wall-clock runtimes (outputs then differ between runs).
    #[arg(long)]
    timing: bool,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Md)]
    format: FormatArg,
    /// Output directory; defaults to the results directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Domain(Error),
    /// Domain failure with a custom JSON body.
    Report(Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Validate(a) => validate(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("For more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            println!("{}", json!({ "error": e.code(), "message": e.to_string() }));
            ExitCode::from(1)
        }
        Err(Failure::Report(body)) => {
            println!("{}", serde_json::to_string_pretty(&body).expect("serializable"));
            ExitCode::from(1)
        }
    }
}

fn require_seed(strategy: Strategy, seed: Option<u64>) -> Result<u64, Failure> {
    match (strategy.is_stochastic(), seed) {
        (_, Some(s)) => Ok(s),
        (true, None) => Err(Failure::Usage(format!("--seed is required for --algo {strategy}"))),
        (false, None) => Ok(0),
    }
}

fn load_params(path: Option<&Path>) -> Result<SolverParams, Failure> {
    let Some(path) = path else {
        return Ok(SolverParams::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Domain(Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    })
}

fn instance_id(instance: &Instance, path: &Path) -> String {
    instance.id().map(str::to_owned).unwrap_or_else(|| {
        path.file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance")
            .trim_end_matches(".instance")
            .to_owned()
    })
}

fn emit(out: Option<&Path>, value: &Value) -> CliResult {
    match out {
        Some(path) => write_json(path, value).map_err(Failure::from),
        None => {
            print!("{}", io::to_canonical_json(value));
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> CliResult {
    let cfg = InstanceConfig {
        patients: a.patients,
        machines: a.machines,
        days: a.days,
        slots: a.slots,
        special_ratio: a.special_ratio,
        sessions: (a.sessions_min, a.sessions_max),
        release_max: a.release_max,
        special_slots_pool: Vec::new(),
    };
    let instance = rtsched_core::generate_instance(&cfg, a.seed)?;
    io::save_instance(&instance, &a.out)?;
    if let (Some(n), Some(path)) = (a.scenario_count, &a.scenarios_out) {
        let set = scenario::generate_scenarios(&instance, &GeneratorConfig::uniform(&instance, n), a.seed)?;
        scenario::save_scenarios(&set, path)?;
    }
    Ok(())
}

fn load_set(path: Option<&Path>, instance: &Instance) -> Result<Option<ScenarioSet>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let set = scenario::load_scenarios(path)?;
    if let Some(f) = scenario::validate_scenarios(&set, instance).first() {
        return Err(Error::InvalidScenarios(f.message.clone()).into());
    }
    Ok(Some(set))
}

fn solve(a: SolveArgs) -> CliResult {
    let seed = require_seed(a.algo, a.seed)?;
    let params = load_params(a.params.as_deref())?;
    let instance = io::load_instance(&a.instance)?;
    if let Some(f) = rtsched_core::validate_instance(&instance).first() {
        return Err(Error::InvalidInstance(f.message.clone()).into());
    }
    let id = instance_id(&instance, &a.instance);
    let (schedule, run) = match a.mode {
        SolveMode::Offline => solve_offline(&instance, a.algo, &params, seed)?,
        SolveMode::Os => {
            let set = load_set(a.scenarios.as_deref(), &instance)?
                .ok_or_else(|| Failure::Usage("--mode os requires --scenarios".into()))?;
            let pending = a
                .pending
                .as_deref()
                .ok_or_else(|| Failure::Usage("--mode os requires --pending".into()))?;
            let patient = instance
                .patient(pending)
                .ok_or_else(|| Error::UnknownPatient(pending.to_owned()))?;
            let frozen = match &a.frozen {
                Some(p) => io::load_schedule(p, &instance)?,
                None => Schedule::new(),
            };
            let step = place_arrival(&instance, &frozen, patient, a.algo, Some(&set), &params, seed)?;
            let mut schedule = frozen;
            match &step.assignment {
                Some(asg) => schedule.assign(asg.clone()),
                None => schedule.leave_unassigned(pending),
            }
            let run = json!({
                "algorithm": a.algo,
                "mode": "os",
                "pending": pending,
                "objective": step.objective,
                "trace": step.trace,
                "convergence_iteration": meta::convergence_iteration(&step.trace),
                "evaluations": step.evaluations,
                "seed": seed,
            });
            (schedule, run)
        }
    };
    let mut doc = io::schedule_document(&schedule, &id);
    doc["run"] = run;
    emit(a.out.as_deref(), &doc)
}

fn solve_offline(instance: &Instance, algo: Strategy, params: &SolverParams, seed: u64) -> Result<(Schedule, Value), Failure> {
    Ok(match algo {
        Strategy::Exact => match solve_exact_offline(instance, SearchLimits::default()) {
            ExactOutcome::Feasible(r) => {
                let run = json!({
                    "algorithm": "exact",
                    "objective": r.objective,
                    "nodes_explored": r.nodes_explored,
                    "proven_optimal": r.proven_optimal,
                });
                (r.schedule, run)
            }
            ExactOutcome::Infeasible { .. } => {
                return Err(Error::Infeasible("no complete schedule exists".into()).into())
            }
            ExactOutcome::Undecided { nodes_explored } => {
                return Err(Failure::Report(json!({
                    "error": "undecided",
                    "message": format!("search stopped after {nodes_explored} nodes without a schedule"),
                })))
            }
        },
        Strategy::Greedy => {
            let s = greedy_in_roster_order(instance);
            let objective = rtsched_core::feasibility::penalized_objective(instance, &s)?;
            (s, json!({ "algorithm": "greedy", "objective": objective }))
        }
        Strategy::Meta(m) => {
            let ctx = SolveContext::offline(instance);
            let run = meta::solve(m, &ctx, params, seed)?;
            let schedule = ctx.full_schedule(&run.best);
            let value = serde_json::to_value(&run).expect("serializable run");
            (schedule, value)
        }
    })
}

fn validate(a: ValidateArgs) -> CliResult {
    let instance = io::load_instance(&a.instance)?;
    let schedule = io::load_schedule(&a.schedule, &instance)?;
    let violations = check_constraints(&instance, &schedule, !a.partial)?;
    let body = serde_json::to_value(&violations).expect("serializable violations");
    if violations.is_empty() {
        print!("{}", io::to_canonical_json(&body));
        Ok(())
    } else {
        Err(Failure::Report(body))
    }
}

fn replay_cmd(a: ReplayArgs) -> CliResult {
    let seed = require_seed(a.algo, a.seed)?;
    let params = load_params(a.params.as_deref())?;
    let instance = io::load_instance(&a.instance)?;
    if let Some(f) = rtsched_core::validate_instance(&instance).first() {
        return Err(Error::InvalidInstance(f.message.clone()).into());
    }
    let set = load_set(a.scenarios.as_deref(), &instance)?;
    let mode = match a.mode {
        ReplayModeArg::Online => ReplayMode::Online,
        ReplayModeArg::Os => {
            if set.is_none() {
                return Err(Failure::Usage("--mode os requires --scenarios".into()));
            }
            ReplayMode::Os
        }
    };
    let order = match a.order {
        OrderArg::Release => ArrivalOrder::Release,
        OrderArg::Input => ArrivalOrder::Input,
    };
    let out = replay::replay(
        &instance,
        &ReplayConfig {
            strategy: a.algo,
            mode,
            order,
            scenarios: set.as_ref(),
            params: &params,
            seed,
        },
    )?;
    let id = instance_id(&instance, &a.instance);
    let mut doc = io::schedule_document(&out.schedule, &id);
    doc["run"] = json!({
        "algorithm": out.strategy,
        "mode": out.mode,
        "objective": out.objective,
        "waiting": waiting_metrics(&instance, &out.schedule),
        "trace": out.trace,
        "convergence_iteration": out.convergence_iteration,
        "evaluations": out.evaluations,
        "seed": seed,
    });
    write_json(&a.out.join("schedule.json"), &doc)?;
    write_json(&a.out.join("decisions.json"), &out.decisions)?;
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> CliResult {
    let mut suite = bench::load_suite(&a.suite)?;
    if let Some(r) = a.reps {
        suite.repetitions = r;
    }
    if let Some(s) = a.seed {
        suite.seed_base = s;
    }
    let params = load_params(a.params.as_deref())?;
    let algorithms: Vec<Strategy> = a.algos.into_iter().fold(Vec::new(), |mut acc, s| {
        if !acc.contains(&s) {
            acc.push(s);
        }
        acc
    });
    let results = bench::run_experiment(
        &suite,
        &ExperimentOptions {
            algorithms,
            params,
            parallel: a.parallel,
            timing: a.timing,
        },
    )?;
    bench::emit_report(&results, a.format.into(), &a.report)?;
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let results = bench::load_results(&a.results)?;
    let out = a.out.unwrap_or_else(|| a.results.clone());
    bench::emit_report(&results, a.format.into(), out)?;
    Ok(())
}
