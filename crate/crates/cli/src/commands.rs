use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use pure_explore::algorithms::{self, RunOptions, StrategyConfig};
use pure_explore::oracle::{equilibrium, solve_global, Method, SolveOptions};
use pure_explore::sim::output::write_outputs;
use pure_explore::sim::scenario::{fig2, scenario as builtin, ScenarioName};
use pure_explore::sim::{run_batch, BatchResult, ExperimentPlan};
use pure_explore::{FamilyKind, ProblemKind, ProblemSpec};

use crate::{
    BatchArgs, BenchArgs, CliError, FamilyArg, MethodArg, ProblemArgs, RunArgs, ScenarioArgs, SolveArgs, THREADS_ENV,
};

type Result<T> = std::result::Result<T, CliError>;

/// Parses `src` as inline JSON when it starts with `{`, as a file path otherwise.
fn read_json<T: DeserializeOwned>(what: &str, src: &str) -> Result<T> {
    let text = if src.trim_start().starts_with('{') {
        src.to_string()
    } else {
        fs::read_to_string(src).map_err(|e| CliError::Config(format!("{what}: cannot read {src}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(format!("serialisation: {e}")))?;
    println!("{s}");
    Ok(())
}

fn parse_mu(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("mu: cannot parse {x:?} as a number")))
        })
        .collect()
}

struct Loaded {
    spec: ProblemSpec,
    family: FamilyKind,
    mu: Vec<f64>,
}

fn load_problem(a: &ProblemArgs) -> Result<Loaded> {
    let kind: ProblemKind = read_json("problem", &a.problem)?;
    let spec = ProblemSpec::new(kind).map_err(|e| CliError::Config(format!("problem: {e}")))?;
    let family = match a.family {
        FamilyArg::Gaussian => FamilyKind::gaussian(a.variance),
        FamilyArg::Bernoulli => FamilyKind::Bernoulli,
    };
    family
        .validate()
        .map_err(|e| CliError::Config(format!("family: {e}")))?;
    let mu = parse_mu(&a.mu)?;
    if mu.len() != spec.arms() {
        return Err(CliError::Config(format!(
            "mu: expected {} values for this problem, got {}",
            spec.arms(),
            mu.len()
        )));
    }
    spec.check_mu(&family, &mu)
        .map_err(|e| CliError::Config(format!("mu: {e}")))?;
    Ok(Loaded { spec, family, mu })
}

pub fn solve(a: &SolveArgs) -> Result<()> {
    let Loaded { spec, family, mu } = load_problem(&a.problem)?;
    let opts = SolveOptions {
        method: match a.method {
            MethodArg::Auto => Method::Auto,
            MethodArg::ClosedForm => Method::ClosedForm,
            MethodArg::Iterative => Method::Iterative,
        },
        tol: a.tol,
        ..Default::default()
    };
    let g = solve_global(&spec, &family, &mu, &opts)?;
    let per_answer: Vec<Value> = g
        .per_answer
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "answer": spec.labels()[i],
                "value": s.value,
                "weights": s.weights,
                "method": s.method,
                "gap": s.gap,
                "iterations": s.iterations,
            })
        })
        .collect();
    let mut out = json!({
        "value": g.value,
        "t_star": g.t_star,
        "oracle_answers": g.oracle_answers.iter().map(|&i| spec.label(i)).collect::<Vec<_>>(),
        "oracle_weights": g.oracle_weights(),
        "per_answer": per_answer,
    });
    if a.equilibrium {
        let tol = a.tol.unwrap_or(1e-4);
        let eqs = g
            .oracle_answers
            .iter()
            .map(|&i| {
                let e = equilibrium(&spec, &family, &mu, i, a.grid, tol)?;
                Ok(json!({
                    "answer": spec.label(i),
                    "q": e.q,
                    "supports": e.supports,
                    "value": e.value,
                    "weights": e.weights,
                    "duality_gap": e.gap,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        out["equilibria"] = Value::Array(eqs);
    }
    print_json(&out)
}

fn set_delta(s: &mut StrategyConfig, delta: f64) {
    s.delta = Some(delta);
    s.log_inv_delta = None;
}

pub fn run(a: &RunArgs) -> Result<()> {
    let Loaded { spec, family, mu } = load_problem(&a.problem)?;
    let mut cfg: StrategyConfig = read_json("strategy", &a.strategy)?;
    if let Some(d) = a.delta {
        set_delta(&mut cfg, d);
    }
    let strategy = cfg
        .resolve(&spec)
        .map_err(|e| CliError::Config(format!("strategy: {e}")))?;
    let opts = RunOptions {
        snapshots: vec![],
        trace_every: a.trace_every,
    };
    let record = algorithms::run(&spec, &family, &mu, &strategy, a.seed, &opts)?;
    match &a.out {
        Some(p) => {
            let s = serde_json::to_string_pretty(&record).map_err(|e| CliError::Config(e.to_string()))?;
            fs::write(p, s).map_err(|e| CliError::Config(format!("out: {}: {e}", p.display())))
        }
        None => print_json(&record),
    }
}

fn jobs(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got {v:?}"))),
        Err(_) => match flag {
            Some(0) => Err(CliError::Config("jobs: must be at least 1".into())),
            j => Ok(j),
        },
    }
}

fn apply_overrides(plan: &mut ExperimentPlan, b: &BatchArgs) {
    if let Some(r) = b.replications {
        plan.replications = r;
    }
    if let Some(s) = b.seed {
        plan.master_seed = s;
    }
    if let Some(d) = b.delta {
        plan.strategies.iter_mut().for_each(|s| set_delta(s, d));
    }
}

fn print_summary(batch: &BatchResult) {
    println!(
        "{:<16} {:>6} {:>10} {:>10} {:>10} {:>7} {:>21} {:>6} {:>6} {:>8}",
        "strategy", "runs", "mean tau", "median", "q95", "errors", "error rate (95% CI)", "trunc", "failed", "corner"
    );
    for s in &batch.aggregate.strategies {
        let corner = s
            .corner_distance
            .map_or_else(|| "-".to_string(), |c| format!("{:.3}", c.median));
        println!(
            "{:<16} {:>6} {:>10.1} {:>10.0} {:>10.0} {:>7} {:>7.4} ({:.4}-{:.4}) {:>6} {:>6} {:>8}",
            s.strategy,
            s.completed,
            s.tau.mean,
            s.tau.median,
            s.tau.q95,
            s.errors,
            s.error_rate,
            s.error_ci95.0,
            s.error_ci95.1,
            s.truncated,
            s.failed,
            corner
        );
        for snap in &s.snapshots {
            if let Some(m) = snap.interior_mass {
                println!(
                    "{:<16}   t = {:>8}: interior mass {m:.3} over {} runs",
                    "", snap.t, snap.runs
                );
            }
        }
    }
}

fn execute(mut plan: ExperimentPlan, b: &BatchArgs) -> Result<()> {
    apply_overrides(&mut plan, b);
    plan.validate().map_err(|e| CliError::Config(format!("plan: {e}")))?;
    if b.dump_config {
        return print_json(&plan);
    }
    let jobs = jobs(b.jobs)?;
    log::info!(
        "running {} x {} runs of {}",
        plan.strategies.len(),
        plan.replications,
        plan.name
    );
    let batch = run_batch(&plan, jobs)?;
    write_outputs(&batch, Path::new(&b.out))?;
    print_summary(&batch);
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let plan: ExperimentPlan = read_json("plan", &a.plan)?;
    execute(plan, &a.batch)
}

pub fn scenario(a: &ScenarioArgs) -> Result<()> {
    let plan = match (a.name, a.lead) {
        (ScenarioName::Fig2, Some(lead)) => fig2(lead),
        (_, Some(_)) => {
            return Err(CliError::Config(
                "lead: only the fig2 scenario has normals to set".into(),
            ))
        }
        (name, None) => builtin(name),
    };
    execute(plan, &a.batch)
}
