//! Sequential identification strategies: Track-and-Stop, Sticky
//! Track-and-Stop and tracking of fixed weights, sharing one sampling loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::FamilyKind;
use crate::glr::{first_candidate, stopping_answer, Threshold};
use crate::oracle::{solve_answer, solve_global, SolveOptions};
use crate::problems::{AnswerId, ProblemSpec};
use crate::tracking::{check_simplex, Tracker, TrackingMode};

pub const DEFAULT_MAX_ROUNDS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Tas,
    StickyTas,
    Fixed,
}

fn default_max_rounds() -> u64 {
    DEFAULT_MAX_ROUNDS
}

fn default_true() -> bool {
    true
}

/// Serialisable strategy description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub strategy: StrategyName,
    /// Display label; defaults to the strategy and tracking mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub tracking: TrackingMode,
    /// Confidence level; exactly one of `delta` and `log_inv_delta` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_inv_delta: Option<f64>,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u64,
    /// Threshold constant override (marks the threshold as not certified).
    #[serde(default, rename = "threshold_C", skip_serializing_if = "Option::is_none")]
    pub threshold_c: Option<f64>,
    #[serde(default = "default_true", rename = "certified_C")]
    pub certified_c: bool,
    /// Target weights of the `fixed` strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Answer labels listed first in the total order; the rest follow in declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_order: Option<Vec<String>>,
}

impl StrategyConfig {
    pub fn new(strategy: StrategyName, tracking: TrackingMode, log_inv_delta: f64) -> Self {
        StrategyConfig {
            strategy,
            name: None,
            tracking,
            delta: None,
            log_inv_delta: Some(log_inv_delta),
            max_rounds: DEFAULT_MAX_ROUNDS,
            threshold_c: None,
            certified_c: true,
            weights: None,
            answer_order: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let mode = match self.tracking {
                TrackingMode::C => "C",
                TrackingMode::D => "D",
            };
            match self.strategy {
                StrategyName::Tas => format!("TaS-{mode}"),
                StrategyName::StickyTas => format!("StickyTaS-{mode}"),
                StrategyName::Fixed => format!("Fixed-{mode}"),
            }
        })
    }

    fn log_inv_delta(&self) -> Result<f64> {
        match (self.delta, self.log_inv_delta) {
            (Some(d), None) => {
                if d > 0.0 && d < 1.0 {
                    Ok(-d.ln())
                } else {
                    Err(Error::Invalid(format!("delta must lie in (0, 1), got {d}")))
                }
            }
            (None, Some(l)) => Ok(l),
            (Some(_), Some(_)) => Err(Error::Invalid("give only one of delta and log_inv_delta".into())),
            (None, None) => Err(Error::Invalid("strategy needs delta or log_inv_delta".into())),
        }
    }

    /// Validates the configuration against a problem.
    pub fn resolve(&self, spec: &ProblemSpec) -> Result<Strategy> {
        let k = spec.arms();
        let lid = self.log_inv_delta()?;
        let threshold = match (self.threshold_c, self.certified_c) {
            (Some(c), _) => Threshold::with_constant(c, lid)?,
            (None, true) => Threshold::certified(k, lid)?,
            (None, false) => {
                return Err(Error::Invalid("certified_C = false requires threshold_C".into()));
            }
        };
        if self.max_rounds <= k as u64 {
            return Err(Error::Invalid(format!(
                "max_rounds must exceed the number of arms ({k}), got {}",
                self.max_rounds
            )));
        }
        let kind = match (self.strategy, &self.weights) {
            (StrategyName::Fixed, Some(w)) => {
                crate::error::check_len("fixed weights", k, w.len())?;
                check_simplex(w)?;
                StrategyKind::Fixed(w.clone())
            }
            (StrategyName::Fixed, None) => {
                return Err(Error::Invalid("the fixed strategy needs weights".into()));
            }
            (_, Some(_)) => return Err(Error::Invalid("weights are only used by the fixed strategy".into())),
            (StrategyName::Tas, None) => StrategyKind::Tas,
            (StrategyName::StickyTas, None) => StrategyKind::StickyTas,
        };
        let mut order = Vec::with_capacity(spec.num_answers());
        for label in self.answer_order.iter().flatten() {
            let a = spec
                .answer_by_label(label)
                .ok_or_else(|| Error::Invalid(format!("unknown answer label {label:?}")))?;
            if order.contains(&a) {
                return Err(Error::Invalid(format!("answer {label:?} listed twice")));
            }
            order.push(a);
        }
        for a in spec.answers() {
            if !order.contains(&a) {
                order.push(a);
            }
        }
        Ok(Strategy {
            name: self.label(),
            kind,
            tracking: self.tracking,
            threshold,
            max_rounds: self.max_rounds,
            order,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategyKind {
    Tas,
    StickyTas,
    Fixed(Vec<f64>),
}

/// A validated strategy bound to a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub name: String,
    pub kind: StrategyKind,
    pub tracking: TrackingMode,
    pub threshold: Threshold,
    pub max_rounds: u64,
    /// Total order on answers used by the stopping rule and sticky selection.
    pub order: Vec<AnswerId>,
}

/// Independent sample streams per arm: the `j`-th sample of arm `k` depends
/// only on the seed, `k` and `j`, so strategies run on one seed see the same
/// rewards for the same pulls.
pub struct ArmSampler {
    family: FamilyKind,
    rngs: Vec<ChaCha8Rng>,
}

impl ArmSampler {
    pub fn new(family: FamilyKind, seed: u64, k: usize) -> Self {
        let rngs = (0..k)
            .map(|arm| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(arm as u64);
                r
            })
            .collect();
        ArmSampler { family, rngs }
    }

    pub fn sample(&mut self, arm: usize, mean: f64) -> f64 {
        self.family.sample(mean, &mut self.rngs[arm])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Rounds after which pull proportions are recorded.
    pub snapshots: Vec<u64>,
    /// Record a trace point every this many rounds (every round when 1).
    pub trace_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub props: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub arm: usize,
    /// Answer whose oracle weights were tracked (none for fixed weights).
    pub tracked: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub strategy: String,
    pub tau: u64,
    pub answer: Option<usize>,
    pub answer_label: Option<String>,
    pub correct: bool,
    pub truncated: bool,
    /// Stopping statistic and threshold at the stopping round.
    pub statistic: Option<f64>,
    pub beta: Option<f64>,
    pub final_counts: Vec<u64>,
    pub final_props: Vec<f64>,
    pub mu_hat_final: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub trace: Vec<TracePoint>,
}

fn at_round(round: u64) -> impl Fn(Error) -> Error {
    move |e| Error::AtRound {
        round,
        source: Box::new(e),
    }
}

/// One run of `strategy` on the bandit with means `true_mu`.
pub fn run(
    spec: &ProblemSpec,
    family: &FamilyKind,
    true_mu: &[f64],
    strategy: &Strategy,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunRecord> {
    family.validate()?;
    spec.check_mu(family, true_mu)?;
    let k = spec.arms();
    let mut sampler = ArmSampler::new(*family, seed, k);
    let mut means = vec![0.0; k];
    let mut counts = vec![0u64; k];
    let mut snapshots = Vec::new();
    let mut trace = Vec::new();
    let mut next_snapshot = {
        let mut s = opts.snapshots.clone();
        s.sort_unstable();
        s.dedup();
        s.into_iter().peekable()
    };
    let mut record = |t: u64, counts: &[u64], snaps: &mut Vec<Snapshot>| {
        while let Some(&s) = next_snapshot.peek() {
            if s > t {
                break;
            }
            next_snapshot.next();
            if s == t {
                snaps.push(Snapshot {
                    t,
                    props: counts.iter().map(|&n| n as f64 / t as f64).collect(),
                });
            }
        }
    };
    for arm in 0..k {
        means[arm] = sampler.sample(arm, true_mu[arm]);
        counts[arm] = 1;
        let t = arm as u64 + 1;
        record(t, &counts, &mut snapshots);
        if let Some(every) = opts.trace_every {
            if t.is_multiple_of(every.max(1)) {
                trace.push(TracePoint { t, arm, tracked: None });
            }
        }
    }
    let mut tracker = Tracker::with_counts(&counts, strategy.tracking);
    let clamp = |m: &[f64]| -> Vec<f64> { m.iter().map(|&x| family.clamp_mean(x)).collect() };
    let mut mu_hat = clamp(&means);
    let mut t = k as u64;
    let mut stop = stopping_answer(
        spec,
        family,
        &counts,
        &mu_hat,
        &strategy.threshold,
        Some(&strategy.order),
    )
    .map_err(at_round(t))?;
    let mut warm: Option<(AnswerId, Vec<f64>)> = None;
    let uniform = vec![1.0 / k as f64; k];
    while stop.is_none() && t < strategy.max_rounds {
        let (w, tracked) = match &strategy.kind {
            StrategyKind::Fixed(w) => (w.clone(), None),
            StrategyKind::Tas => match solve_global(spec, family, &mu_hat, &SolveOptions::default()) {
                Ok(g) => (g.first_weights().to_vec(), Some(g.oracle_answers[0])),
                Err(Error::Degenerate(_)) => (uniform.clone(), None),
                Err(e) => return Err(at_round(t + 1)(e)),
            },
            StrategyKind::StickyTas => {
                let i = first_candidate(
                    spec,
                    family,
                    &counts,
                    &mu_hat,
                    &strategy.threshold,
                    Some(&strategy.order),
                )
                .map_err(at_round(t + 1))?;
                let opts = SolveOptions {
                    warm_start: warm.as_ref().filter(|(a, _)| *a == i).map(|(_, w)| w.clone()),
                    ..Default::default()
                };
                let sol = solve_answer(spec, family, &mu_hat, i, &opts).map_err(at_round(t + 1))?;
                if sol.value > 0.0 {
                    let w = sol.representative().to_vec();
                    warm = Some((i, w.clone()));
                    (w, Some(i))
                } else {
                    // every weight vector is optimal for `i` at these means; use the
                    // oracle weights of the empirically best answer
                    let w = match solve_global(spec, family, &mu_hat, &SolveOptions::default()) {
                        Ok(g) => g.first_weights().to_vec(),
                        Err(Error::Degenerate(_)) => uniform.clone(),
                        Err(e) => return Err(at_round(t + 1)(e)),
                    };
                    (w, Some(i))
                }
            }
        };
        let arm = tracker.next_arm(&w).map_err(at_round(t + 1))?;
        let x = sampler.sample(arm, true_mu[arm]);
        counts[arm] += 1;
        means[arm] += (x - means[arm]) / counts[arm] as f64;
        mu_hat[arm] = family.clamp_mean(means[arm]);
        t += 1;
        record(t, &counts, &mut snapshots);
        if let Some(every) = opts.trace_every {
            if t.is_multiple_of(every.max(1)) {
                trace.push(TracePoint {
                    t,
                    arm,
                    tracked: tracked.map(|a| a.0),
                });
            }
        }
        stop = stopping_answer(
            spec,
            family,
            &counts,
            &mu_hat,
            &strategy.threshold,
            Some(&strategy.order),
        )
        .map_err(at_round(t))?;
    }
    let answer = stop.map(|s| s.answer);
    Ok(RunRecord {
        seed,
        strategy: strategy.name.clone(),
        tau: t,
        answer: answer.map(|a| a.0),
        answer_label: answer.map(|a| spec.label(a).to_string()),
        correct: answer.is_some_and(|a| spec.is_correct(a, true_mu)),
        truncated: stop.is_none(),
        statistic: stop.map(|s| s.statistic),
        beta: stop.map(|s| s.beta),
        final_props: counts.iter().map(|&n| n as f64 / t as f64).collect(),
        final_counts: counts,
        mu_hat_final: means,
        snapshots,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;

    const STD: FamilyKind = FamilyKind::Gaussian { variance: 1.0 };

    fn spec(json: &str) -> ProblemSpec {
        ProblemSpec::new(serde_json::from_str::<ProblemKind>(json).unwrap()).unwrap()
    }

    fn strategy(json: &str, p: &ProblemSpec) -> Strategy {
        serde_json::from_str::<StrategyConfig>(json)
            .unwrap()
            .resolve(p)
            .unwrap()
    }

    #[test]
    fn config_round_trip_and_validation() {
        let p = spec(r#"{"kind":"any_low_arm","arms":2,"threshold":0.0}"#);
        let c: StrategyConfig =
            serde_json::from_str(r#"{"strategy":"sticky_tas","tracking":"C","delta":0.1,"max_rounds":1000}"#).unwrap();
        let back: StrategyConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
        let s = c.resolve(&p).unwrap();
        assert!(s.threshold.certified);
        assert_eq!(s.name, "StickyTaS-C");
        for bad in [
            r#"{"strategy":"tas","delta":1.5}"#,
            r#"{"strategy":"tas"}"#,
            r#"{"strategy":"tas","delta":0.1,"log_inv_delta":2}"#,
            r#"{"strategy":"fixed","delta":0.1}"#,
            r#"{"strategy":"fixed","delta":0.1,"weights":[0.5,0.6]}"#,
            r#"{"strategy":"tas","delta":0.1,"max_rounds":2}"#,
            r#"{"strategy":"tas","delta":0.1,"certified_C":false}"#,
            r#"{"strategy":"tas","delta":0.1,"answer_order":["arm:7"]}"#,
        ] {
            let c: StrategyConfig = serde_json::from_str(bad).unwrap();
            assert!(c.resolve(&p).is_err(), "{bad}");
        }
        assert!(serde_json::from_str::<StrategyConfig>(r#"{"strategy":"tas","delta":0.1,"bogus":1}"#).is_err());
    }

    #[test]
    fn answer_order_puts_labels_first() {
        let p = spec(r#"{"kind":"any_low_arm","arms":2,"threshold":0.0}"#);
        let s = strategy(r#"{"strategy":"tas","delta":0.1,"answer_order":["arm:2"]}"#, &p);
        assert_eq!(s.order, vec![AnswerId(2), AnswerId(0), AnswerId(1)]);
    }

    #[test]
    fn same_seed_same_record() {
        let p = spec(r#"{"kind":"eps_minimum_threshold","arms":2,"threshold":0.0}"#);
        for json in [
            r#"{"strategy":"sticky_tas","delta":0.1}"#,
            r#"{"strategy":"tas","tracking":"D","delta":0.1}"#,
            r#"{"strategy":"fixed","delta":0.1,"weights":[0.5,0.5]}"#,
        ] {
            let s = strategy(json, &p);
            let a = run(&p, &STD, &[1.0, 1.0], &s, 42, &RunOptions::default()).unwrap();
            let b = run(&p, &STD, &[1.0, 1.0], &s, 42, &RunOptions::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.final_counts.iter().sum::<u64>(), a.tau);
            assert!(!a.truncated);
            assert!(a.statistic.unwrap() > a.beta.unwrap());
        }
    }

    #[test]
    fn paired_streams_share_samples() {
        let mut a = ArmSampler::new(STD, 9, 3);
        let mut b = ArmSampler::new(STD, 9, 3);
        let xa: Vec<f64> = (0..5).map(|_| a.sample(2, 0.0)).collect();
        let _ = b.sample(0, 0.0);
        let _ = b.sample(1, 0.0);
        let xb: Vec<f64> = (0..5).map(|_| b.sample(2, 0.0)).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn truncation_is_recorded() {
        let p = spec(r#"{"kind":"any_sign","arms":2,"threshold":0.0}"#);
        let s = strategy(r#"{"strategy":"tas","log_inv_delta":1000,"max_rounds":50}"#, &p);
        let r = run(
            &p,
            &STD,
            &[0.01, -0.01],
            &s,
            1,
            &RunOptions {
                snapshots: vec![10, 50, 70],
                trace_every: Some(10),
            },
        )
        .unwrap();
        assert!(r.truncated);
        assert_eq!(r.tau, 50);
        assert!(r.answer.is_none() && !r.correct);
        assert_eq!(r.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(), vec![10, 50]);
        assert_eq!(r.trace.len(), 5);
    }

    #[test]
    fn bernoulli_runs() {
        let p = spec(r#"{"kind":"any_low_arm","arms":2,"threshold":0.5}"#);
        let s = strategy(r#"{"strategy":"sticky_tas","delta":0.05}"#, &p);
        let r = run(&p, &FamilyKind::Bernoulli, &[0.2, 0.7], &s, 3, &RunOptions::default()).unwrap();
        assert!(!r.truncated);
        assert!(r.answer_label.is_some());
    }

    #[test]
    fn sticky_follows_answer_order() {
        // far from the threshold the first candidate in the order is tracked
        let p = spec(r#"{"kind":"any_low_arm","arms":2,"threshold":0.0}"#);
        let s = strategy(r#"{"strategy":"sticky_tas","log_inv_delta":20,"threshold_C":1.0}"#, &p);
        let r = run(
            &p,
            &STD,
            &[-1.0, -1.0],
            &s,
            5,
            &RunOptions {
                snapshots: vec![],
                trace_every: Some(1),
            },
        )
        .unwrap();
        let late: Vec<Option<usize>> = r.trace.iter().filter(|p| p.t > r.tau / 2).map(|p| p.tracked).collect();
        assert!(late.iter().all(|&a| a == late[0]));
    }

    #[test]
    fn sticky_on_incorrect_first_answer_tracks_global_weights() {
        // "lo" precedes "hi" in the order and stays a candidate for a long
        // time, while being incorrect at the empirical means
        let p = spec(r#"{"kind":"eps_minimum_threshold","arms":3,"threshold":0.0}"#);
        let s = strategy(r#"{"strategy":"sticky_tas","delta":0.1}"#, &p);
        let r = run(&p, &STD, &[0.3, 0.5, 1.0], &s, 1, &RunOptions::default()).unwrap();
        assert!(r.correct);
        assert!(r.tau < 20_000, "{}", r.tau);
        assert!(r.final_counts.iter().all(|&n| n as f64 > (r.tau as f64).sqrt()));
    }
}
