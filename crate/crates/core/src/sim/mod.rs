//! Monte-Carlo replication engine: batches of seeded runs and their aggregates.

pub mod output;
pub mod scenario;
pub mod seed;
pub mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run, RunOptions, RunRecord, StrategyConfig};
use crate::error::{Error, Result};
use crate::expfam::FamilyKind;
use crate::oracle::{solve_global, SolveOptions};
use crate::problems::{ProblemKind, ProblemSpec};
use stats::{clopper_pearson, mean, quantile_sorted, std_dev, Histogram};

/// Largest tolerated fraction of failed runs in a batch.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
/// Cap on the number of Freedman–Diaconis bins.
pub const MAX_TAU_BINS: usize = 200;
/// Bins of the proportion histograms on `[0, 1]`.
pub const PROPORTION_BINS: usize = 50;

/// What to record beyond stopping times and answers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Collect {
    /// Rounds at which pull proportions are recorded (strictly increasing).
    #[serde(default)]
    pub snapshots: Vec<u64>,
    /// Keep every `trace_every`-th round of each run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_every: Option<u64>,
    /// Open interval for the interior-mass statistic of `proportion_arm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
    /// 0-based arm whose proportion is histogrammed at snapshot times.
    #[serde(default)]
    pub proportion_arm: usize,
    /// Fixed number of stopping-time bins instead of Freedman–Diaconis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub problem: ProblemKind,
    #[serde(default)]
    pub family: FamilyKind,
    pub mu: Vec<f64>,
    pub strategies: Vec<StrategyConfig>,
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub collect: Collect,
}

impl ExperimentPlan {
    /// Checks the plan and builds its problem.
    pub fn validate(&self) -> Result<ProblemSpec> {
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Invalid("plan lists no strategies".into()));
        }
        let c = &self.collect;
        if c.snapshots.windows(2).any(|w| w[0] >= w[1]) || c.snapshots.first() == Some(&0) {
            return Err(Error::Invalid(
                "snapshot times must be positive and strictly increasing".into(),
            ));
        }
        if let Some((lo, hi)) = c.interval {
            if !(lo < hi) {
                return Err(Error::Invalid(format!("empty interval ({lo}, {hi})")));
            }
        }
        if c.tau_bins == Some(0) {
            return Err(Error::Invalid("tau_bins must be at least 1".into()));
        }
        self.family.validate()?;
        let spec = ProblemSpec::new(self.problem.clone())?;
        spec.check_mu(&self.family, &self.mu)?;
        if c.proportion_arm >= spec.arms() {
            return Err(Error::Invalid(format!(
                "proportion_arm {} out of range",
                c.proportion_arm
            )));
        }
        for s in &self.strategies {
            s.resolve(&spec)?;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: u64,
    pub seed: u64,
    pub message: String,
}

/// All runs of one strategy, indexed by run id.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRuns {
    pub label: String,
    pub runs: Vec<std::result::Result<RunRecord, RunFailure>>,
}

impl StrategyRuns {
    pub fn completed(&self) -> impl Iterator<Item = (u64, &RunRecord)> {
        self.runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().ok().map(|r| (i as u64, r)))
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunFailure> {
        self.runs.iter().filter_map(|r| r.as_ref().err())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile_sorted(&v, p);
        Summary {
            mean: mean(xs),
            std_dev: std_dev(xs),
            min: q(0.0),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: q(1.0),
        }
    }
}

/// Distribution of one arm's pull proportion at a snapshot time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStats {
    pub t: u64,
    /// Runs that reached round `t` before stopping.
    pub runs: u64,
    pub histogram: Histogram,
    /// Fraction of those runs with proportion inside the open interval.
    pub interior_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: String,
    pub replications: u64,
    pub completed: u64,
    pub failed: u64,
    /// Runs that hit the round cap without stopping.
    pub truncated: u64,
    /// Runs that stopped with an incorrect answer.
    pub errors: u64,
    pub error_rate: f64,
    /// Exact binomial 95% interval of the error rate.
    pub error_ci95: (f64, f64),
    pub tau: Summary,
    /// Stopping times of the completed runs (truncated runs at the cap).
    pub tau_histogram: Histogram,
    pub snapshots: Vec<SnapshotStats>,
    /// ℓ∞ distance of the final proportions to the nearest oracle weight vector at the true means.
    pub corner_distance: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub plan: String,
    pub master_seed: u64,
    pub strategies: Vec<StrategyAggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub plan: ExperimentPlan,
    pub strategies: Vec<StrategyRuns>,
    pub aggregate: Aggregate,
}

impl BatchResult {
    pub fn find(&self, label: &str) -> Option<(&StrategyRuns, &StrategyAggregate)> {
        let i = self.strategies.iter().position(|s| s.label == label)?;
        Some((&self.strategies[i], &self.aggregate.strategies[i]))
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// ℓ∞ distance from `props` to the closest of `corners`.
pub fn corner_distance(props: &[f64], corners: &[Vec<f64>]) -> f64 {
    corners.iter().map(|c| linf(props, c)).fold(f64::INFINITY, f64::min)
}

/// Runs every strategy `replications` times on `jobs` threads (all available
/// cores when `None`). Run `i` of every strategy uses the seed
/// [`seed::run_seed`]`(master_seed, i)`.
pub fn run_batch(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<BatchResult> {
    let spec = plan.validate()?;
    let strategies = plan
        .strategies
        .iter()
        .map(|s| s.resolve(&spec))
        .collect::<Result<Vec<_>>>()?;
    let opts = RunOptions {
        snapshots: plan.collect.snapshots.clone(),
        trace_every: plan.collect.trace_every,
    };
    let n = plan.replications;
    let work: Vec<(usize, u64)> = (0..strategies.len())
        .flat_map(|s| (0..n).map(move |i| (s, i)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        work.par_iter()
            .map(|&(s, i)| {
                let seed = seed::run_seed(plan.master_seed, i);
                run(&spec, &plan.family, &plan.mu, &strategies[s], seed, &opts).map_err(|e| RunFailure {
                    run_id: i,
                    seed,
                    message: e.to_string(),
                })
            })
            .collect()
    });
    let mut it = results.into_iter();
    let runs: Vec<StrategyRuns> = strategies
        .iter()
        .map(|s| StrategyRuns {
            label: s.name.clone(),
            runs: it.by_ref().take(n as usize).collect(),
        })
        .collect();
    let total = runs.len() * n as usize;
    let failed: Vec<&RunFailure> = runs.iter().flat_map(|r| r.failures()).collect();
    check_failures(&failed, total)?;
    for f in &failed {
        log::warn!("run {} (seed {}) failed: {}", f.run_id, f.seed, f.message);
    }
    let corners = solve_global(&spec, &plan.family, &plan.mu, &SolveOptions::default())
        .ok()
        .map(|g| g.oracle_weights().into_iter().map(<[f64]>::to_vec).collect::<Vec<_>>());
    let aggregate = Aggregate {
        plan: plan.name.clone(),
        master_seed: plan.master_seed,
        strategies: runs.iter().map(|r| aggregate(plan, r, corners.as_deref())).collect(),
    };
    Ok(BatchResult {
        plan: plan.clone(),
        strategies: runs,
        aggregate,
    })
}

fn check_failures(failed: &[&RunFailure], total: usize) -> Result<()> {
    if failed.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::Batch {
            failed: failed.len(),
            total,
            first: failed[0].message.clone(),
        });
    }
    Ok(())
}

fn aggregate(plan: &ExperimentPlan, runs: &StrategyRuns, corners: Option<&[Vec<f64>]>) -> StrategyAggregate {
    let done: Vec<&RunRecord> = runs.completed().map(|(_, r)| r).collect();
    let completed = done.len() as u64;
    let errors = done.iter().filter(|r| !r.truncated && !r.correct).count() as u64;
    let taus: Vec<f64> = done.iter().map(|r| r.tau as f64).collect();
    let tau_histogram = match plan.collect.tau_bins {
        Some(b) if !taus.is_empty() => {
            let lo = taus.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Histogram::uniform(&taus, lo, if hi > lo { hi } else { lo + 1.0 }, b)
        }
        _ => Histogram::freedman_diaconis(&taus, MAX_TAU_BINS),
    };
    let arm = plan.collect.proportion_arm;
    let snapshots =
        plan.collect
            .snapshots
            .iter()
            .map(|&t| {
                let props: Vec<f64> = done
                    .iter()
                    .filter_map(|r| r.snapshots.iter().find(|s| s.t == t).map(|s| s.props[arm]))
                    .collect();
                let interior_mass =
                    plan.collect.interval.filter(|_| !props.is_empty()).map(|(lo, hi)| {
                        props.iter().filter(|&&p| p > lo && p < hi).count() as f64 / props.len() as f64
                    });
                SnapshotStats {
                    t,
                    runs: props.len() as u64,
                    histogram: Histogram::uniform(&props, 0.0, 1.0, PROPORTION_BINS),
                    interior_mass,
                }
            })
            .collect();
    let corner_distance = corners.filter(|c| !c.is_empty() && !done.is_empty()).map(|c| {
        let d: Vec<f64> = done.iter().map(|r| corner_distance(&r.final_props, c)).collect();
        Summary::of(&d)
    });
    StrategyAggregate {
        strategy: runs.label.clone(),
        replications: plan.replications,
        completed,
        failed: plan.replications - completed,
        truncated: done.iter().filter(|r| r.truncated).count() as u64,
        errors,
        error_rate: if completed > 0 {
            errors as f64 / completed as f64
        } else {
            f64::NAN
        },
        error_ci95: clopper_pearson(errors, completed, 0.95),
        tau: Summary::of(&taus),
        tau_histogram,
        snapshots,
        corner_distance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{Strategy, StrategyName};
    use crate::tracking::TrackingMode;

    fn plan(reps: u64) -> ExperimentPlan {
        ExperimentPlan {
            name: "test".into(),
            problem: ProblemKind::AnyLowArm {
                arms: 2,
                threshold: 0.0,
            },
            family: FamilyKind::default(),
            mu: vec![-1.0, 0.5],
            strategies: vec![
                StrategyConfig::new(StrategyName::Tas, TrackingMode::C, 3.0),
                StrategyConfig::new(StrategyName::StickyTas, TrackingMode::C, 3.0),
            ],
            replications: reps,
            master_seed: 11,
            collect: Collect {
                snapshots: vec![5, 20],
                interval: Some((0.2, 0.8)),
                ..Default::default()
            },
        }
    }

    #[test]
    fn single_replication_is_one_run() {
        let p = plan(1);
        let b = run_batch(&p, Some(1)).unwrap();
        let spec = p.validate().unwrap();
        let s: Strategy = p.strategies[0].resolve(&spec).unwrap();
        let opts = RunOptions {
            snapshots: vec![5, 20],
            trace_every: None,
        };
        let direct = run(&spec, &p.family, &p.mu, &s, seed::run_seed(11, 0), &opts).unwrap();
        assert_eq!(b.strategies[0].runs[0].as_ref().unwrap(), &direct);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = plan(30);
        let a = run_batch(&p, Some(1)).unwrap();
        let b = run_batch(&p, Some(3)).unwrap();
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(a.strategies, b.strategies);
    }

    #[test]
    fn histogram_masses_add_up() {
        let p = plan(40);
        let b = run_batch(&p, None).unwrap();
        for s in &b.aggregate.strategies {
            assert_eq!(s.tau_histogram.total() + s.failed, p.replications);
            assert!(s.error_ci95.0 <= s.error_rate && s.error_rate <= s.error_ci95.1);
            for snap in &s.snapshots {
                assert_eq!(snap.histogram.total(), snap.runs);
            }
        }
    }

    #[test]
    fn paired_seeds_share_rewards() {
        let mut p = plan(5);
        p.strategies = vec![
            StrategyConfig::new(StrategyName::Tas, TrackingMode::C, 3.0),
            StrategyConfig {
                name: Some("TaS-again".into()),
                ..StrategyConfig::new(StrategyName::Tas, TrackingMode::C, 3.0)
            },
        ];
        let b = run_batch(&p, None).unwrap();
        for (x, y) in b.strategies[0].runs.iter().zip(&b.strategies[1].runs) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!((x.tau, x.answer, &x.final_counts), (y.tau, y.answer, &y.final_counts));
        }
    }

    #[test]
    fn invalid_plans() {
        let mut p = plan(0);
        assert!(run_batch(&p, None).is_err());
        p.replications = 1;
        p.collect.snapshots = vec![20, 5];
        assert!(p.validate().is_err());
        p.collect.snapshots = vec![];
        p.mu = vec![0.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn failure_budget() {
        let f = RunFailure {
            run_id: 0,
            seed: 0,
            message: "boom".into(),
        };
        assert!(check_failures(&[&f], 100).is_ok());
        match check_failures(&[&f, &f], 100) {
            Err(Error::Batch { failed, total, first }) => assert_eq!((failed, total, first.as_str()), (2, 100, "boom")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corner_distance_is_min_linf() {
        let c = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(corner_distance(&[0.7, 0.3], &c), 0.30000000000000004);
    }
}
