use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_pure-explore");
const ANYLOW: &str = r#"{"kind":"any_low_arm","arms":2,"threshold":0.0}"#;

fn cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("PUREEXPLORE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_any_low_arm() {
    let o = cli(&["solve", "--problem", ANYLOW, "--mu=-1,-0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["t_star"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(v["oracle_answers"], serde_json::json!(["arm:1"]));
}

#[test]
fn solve_problem_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("anylow.json");
    fs::write(&p, ANYLOW).unwrap();
    let o = cli(&["solve", "--problem", p.to_str().unwrap(), "--mu", "-1,-1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["oracle_answers"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_rejects_wrong_mu_length() {
    let o = cli(&["solve", "--problem", ANYLOW, "--mu=-1,-0.5,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));
    let o = cli(&["solve", "--problem", ANYLOW, "--mu=-1,abc"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_rejects_unknown_keys() {
    let o = cli(&[
        "solve",
        "--problem",
        r#"{"kind":"any_low_arm","arms":2,"threshold":0,"x":1}"#,
        "--mu=1,1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem"));
}

#[test]
fn solve_degenerate_is_solver_failure() {
    // on the hyperplane both answers are correct with zero divergence
    let o = cli(&[
        "solve",
        "--problem",
        r#"{"kind":"any_halfspace","normals":[[0.5,0.5]]}"#,
        "--mu=1,-1",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn solve_with_equilibrium() {
    let o = cli(&["solve", "--problem", ANYLOW, "--mu=-1,-1", "--equilibrium"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    let eqs = v["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 2);
    for e in eqs {
        let q: Vec<f64> = serde_json::from_value(e["q"].clone()).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((e["value"].as_f64().unwrap() - 0.5).abs() < 2e-3);
        assert!(e["duality_gap"].as_f64().unwrap() <= 1e-4);
        assert_eq!(e["supports"].as_array().unwrap().len(), q.len());
    }
}

#[test]
fn run_prints_record() {
    let o = cli(&[
        "run",
        "--problem",
        ANYLOW,
        "--mu=-1,0.5",
        "--strategy",
        r#"{"strategy":"sticky_tas","tracking":"C","delta":0.1}"#,
        "--delta",
        "0.01",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!(v["tau"].as_u64().unwrap() >= 2);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["strategy"], "StickyTaS-C");
}

fn small_fig4(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "scenario",
        "fig4",
        "--replications",
        "15",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn scenario_writes_parseable_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = small_fig4(&a, &["--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("TaS-D"));
    let o = Command::new(BIN)
        .args([
            "scenario",
            "fig4",
            "--replications",
            "15",
            "--seed",
            "9",
            "--out",
            b.to_str().unwrap(),
        ])
        .env("PUREEXPLORE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["tau.csv", "props.csv", "aggregate.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let mut r = csv::Reader::from_path(a.join("tau.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["run_id", "strategy", "tau", "correct", "answer", "prop_1", "prop_2", "prop_3"]
    );
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|row| row.len() == header.len()));
    let agg: Value = serde_json::from_str(&fs::read_to_string(a.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["strategies"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_thread_override_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args([
            "scenario",
            "fig4",
            "--replications",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("PUREEXPLORE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_replications_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_fig4(dir.path(), &["--replications", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "scenario",
        "fig3",
        "--replications",
        "7",
        "--delta",
        "0.001",
        "--dump-config",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let plan = dir.path().join("plan.json");
    fs::write(&plan, &o.stdout).unwrap();
    let again = cli(&["bench", "--plan", plan.to_str().unwrap(), "--dump-config"]);
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert_eq!(o.stdout, again.stdout);
    let v = stdout_json(&o);
    assert_eq!(v["replications"], 7);
    assert_eq!(v["strategies"][0]["delta"], 0.001);
}

#[test]
fn bench_runs_a_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = r#"{
        "name": "anylow",
        "problem": {"kind": "any_low_arm", "arms": 2, "threshold": 0.0},
        "mu": [-1.0, 0.5],
        "strategies": [{"strategy": "tas", "delta": 0.05}, {"strategy": "sticky_tas", "delta": 0.05}],
        "replications": 10,
        "collect": {"snapshots": [4, 8]}
    }"#;
    let out = dir.path().join("out");
    let o = cli(&["bench", "--plan", plan, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(out.join("props.csv")).unwrap();
    assert_eq!(r.headers().unwrap().len(), 5);
    assert!(r.records().all(|x| x.unwrap().len() == 5));
    let bad = cli(&["bench", "--plan", r#"{"name":"x"}"#]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unknown_scenario_is_rejected() {
    let o = cli(&["scenario", "fig9", "--dump-config"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["scenario", "fig3", "--lead", "0.5", "--dump-config"]);
    assert_eq!(o.status.code(), Some(2));
}
