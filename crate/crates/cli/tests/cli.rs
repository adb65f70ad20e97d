use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn rtsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtsched")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn i1() -> Value {
    json!({
        "version": 1, "machines": 1, "horizon_days": 5, "slots_per_day": 2,
        "patients": [
            {"id": "P1", "kind": "general", "sessions": 2},
            {"id": "P2", "kind": "special", "sessions": 3, "allowed_slots": [2]}
        ]
    })
}

fn i1_optimal() -> Value {
    json!({
        "version": 1, "instance_id": "I1",
        "assignments": [
            {"id": "P1", "machine": 1, "start_day": 1, "slot": 1},
            {"id": "P2", "machine": 1, "start_day": 1, "slot": 2}
        ]
    })
}

fn suites() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites")
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn validate_accepts_optimal_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i1.json", &i1());
    let sched = write(dir.path(), "s.json", &i1_optimal());
    let out = rtsched(&["validate", "--instance", &inst, "--schedule", &sched]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out), json!([]));
}

#[test]
fn validate_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i1.json", &i1());
    let bad = json!({"version": 1, "assignments": [
        {"id": "P1", "machine": 1, "start_day": 1, "slot": 2},
        {"id": "P2", "machine": 1, "start_day": 1, "slot": 2}
    ]});
    let sched = write(dir.path(), "s.json", &bad);
    let out = rtsched(&["validate", "--instance", &inst, "--schedule", &sched]);
    assert_eq!(code(&out), 1);
    let codes: Vec<String> = stdout_json(&out)
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["code"].as_str().unwrap().to_string())
        .collect();
    assert!(codes.iter().all(|c| c == "C7a_double_booking"), "{codes:?}");
    assert_eq!(codes.len(), 2);

    let partial = write(dir.path(), "p.json", &json!({"version": 1, "assignments": [
        {"id": "P1", "machine": 1, "start_day": 1, "slot": 1}
    ]}));
    assert_eq!(code(&rtsched(&["validate", "--instance", &inst, "--schedule", &partial])), 1);
    let out = rtsched(&["validate", "--instance", &inst, "--schedule", &partial, "--partial"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)[0]["code"], "unassigned_patient");
}

#[test]
fn exact_solve_finds_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i1.json", &i1());
    let out_path = dir.path().join("sched.json");
    let out = rtsched(&["solve", "--algo", "exact", "--instance", &inst, "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc["run"]["objective"], 9.0);
    let check = rtsched(&["validate", "--instance", &inst, "--schedule", out_path.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
}

#[test]
fn exact_solve_reports_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "pigeon.json",
        &json!({
            "version": 1, "machines": 1, "horizon_days": 2, "slots_per_day": 1,
            "patients": [
                {"id": "A", "kind": "general", "sessions": 2},
                {"id": "B", "kind": "general", "sessions": 2}
            ]
        }),
    );
    let out = rtsched(&["solve", "--algo", "exact", "--instance", &inst]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["error"], "infeasible");
}

#[test]
fn metaheuristic_solve_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i1.json", &i1());
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = rtsched(&["solve", "--algo", "wo", "--instance", &inst, "--seed", "4", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
        let mut doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        doc["run"].as_object_mut().unwrap().remove("wall_time");
        doc
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "i1.json", &i1());
    let missing_seed = rtsched(&["solve", "--algo", "ga", "--instance", &inst]);
    assert_eq!(code(&missing_seed), 2);
    assert!(missing_seed.stdout.is_empty());
    assert!(!missing_seed.stderr.is_empty());
    assert_eq!(code(&rtsched(&["solve", "--algo", "sa", "--instance", &inst, "--seed", "1"])), 2);
    assert_eq!(code(&rtsched(&["frobnicate"])), 2);
    assert_eq!(code(&rtsched(&["validate", "--instance", &inst, "--bogus"])), 2);
}

#[test]
fn domain_errors_exit_1_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = rtsched(&["solve", "--algo", "greedy", "--instance", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["error"], "io");

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{").unwrap();
    let out = rtsched(&["solve", "--algo", "greedy", "--instance", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["error"], "parse");
}

#[test]
fn generate_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: &str| {
        let inst = dir.path().join(format!("{name}.json"));
        let scen = dir.path().join(format!("{name}.scenarios.json"));
        let out = rtsched(&[
            "generate", "--patients", "6", "--machines", "2", "--days", "10", "--slots", "2",
            "--sessions-max", "3", "--release-max", "4", "--seed", seed,
            "--out", inst.to_str().unwrap(),
            "--scenario-count", "3", "--scenarios-out", scen.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        (fs::read(&inst).unwrap(), fs::read(&scen).unwrap())
    };
    let a = gen("a", "11");
    assert_eq!(a, gen("b", "11"));
    assert_ne!(a.0, gen("c", "12").0);
    let inst = rtsched_core::load_instance(dir.path().join("a.json")).unwrap();
    assert_eq!(inst.patients().len(), 6);
    let set = rtsched_core::load_scenarios(dir.path().join("a.scenarios.json")).unwrap();
    assert_eq!(set.len(), 3);
}

#[test]
fn replay_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let scen = dir.path().join("scen.json");
    let out = rtsched(&[
        "generate", "--patients", "6", "--machines", "1", "--days", "12", "--slots", "2",
        "--sessions-max", "3", "--release-max", "5", "--seed", "3",
        "--out", inst.to_str().unwrap(),
        "--scenario-count", "2", "--scenarios-out", scen.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let params = write(dir.path(), "params.json", &json!({"max_iterations": 30}));
    for (algo, mode) in [("greedy", "online"), ("exact", "os"), ("ga", "os"), ("wo", "online")] {
        let run_dir = dir.path().join(format!("{algo}-{mode}"));
        let out = rtsched(&[
            "replay", "--instance", inst.to_str().unwrap(), "--algo", algo, "--mode", mode,
            "--scenarios", scen.to_str().unwrap(), "--params", &params, "--seed", "5",
            "--out", run_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{algo}/{mode}: {}", String::from_utf8_lossy(&out.stdout));
        let decisions: Value = serde_json::from_str(&fs::read_to_string(run_dir.join("decisions.json")).unwrap()).unwrap();
        assert_eq!(decisions.as_array().unwrap().len(), 6);
        let check = rtsched(&[
            "validate", "--instance", inst.to_str().unwrap(),
            "--schedule", run_dir.join("schedule.json").to_str().unwrap(),
        ]);
        assert_eq!(code(&check), 0, "{algo}/{mode}: {}", String::from_utf8_lossy(&check.stdout));
    }
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", &json!({"max_iterations": 40}));
    let suite = suites().join("desk");
    let bench = |name: &str, parallel: bool| {
        let report = dir.path().join(name);
        let mut args = vec![
            "bench", "--suite", suite.to_str().unwrap(), "--algos", "greedy,exact,ga,ffo,wo",
            "--reps", "2", "--seed", "9", "--params", &params, "--format", "csv",
            "--report", report.to_str().unwrap(),
        ];
        if parallel {
            args.push("--parallel");
        }
        let out = rtsched(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
        tree(&report)
    };
    let first = bench("one", true);
    assert!(first.iter().any(|(p, _)| p == Path::new("summary.csv")));
    assert!(first.iter().any(|(p, _)| p.starts_with("traces")));
    assert_eq!(first, bench("two", true));
    assert_eq!(first, bench("three", false));

    let md = dir.path().join("md");
    let out = rtsched(&[
        "report", "--results", dir.path().join("one").to_str().unwrap(), "--format", "md",
        "--out", md.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(md.join("report.md")).unwrap();
    assert!(text.contains("| Algorithm | Waiting Days | Waiting Patients |"));
    let json_out = dir.path().join("json");
    let out = rtsched(&[
        "report", "--results", dir.path().join("one").to_str().unwrap(), "--format", "json",
        "--out", json_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let summary: Value = serde_json::from_str(&fs::read_to_string(json_out.join("summary.json")).unwrap()).unwrap();
    assert!(!summary.as_array().unwrap().is_empty());
}

#[test]
fn report_without_runs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = rtsched(&["report", "--results", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}
