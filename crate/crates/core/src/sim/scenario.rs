//! Ready-made experiment plans.
//!
//! * `fig2`: ten Gaussian arms, ten half-space questions with normals that are
//!   cyclic shifts of `(lead, (1 - lead)/9, ..., (1 - lead)/9)`, all means
//!   `-0.1`; Track-and-Stop against Sticky Track-and-Stop.
//! * `fig3`: two arms, normals `(a, 1 - a)` and `(1 - a, a)` with `a = 0.2`,
//!   means `(-0.1, -0.1)`; C-tracking Track-and-Stop with stopping disabled,
//!   watching the proportion of arm 1.
//! * `fig4`: a sign question on arm 1 composed with a two-normal half-space
//!   question on arms 2 and 3 (`a = 0.1`), variance `1/4`, means `-0.2`;
//!   D-tracking Track-and-Stop against D-tracking of fixed oracle weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Collect, ExperimentPlan};
use crate::algorithms::{StrategyConfig, StrategyName};
use crate::error::Error;
use crate::expfam::FamilyKind;
use crate::problems::{BlockKind, ProblemKind};
use crate::tracking::TrackingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Fig2,
    Fig3,
    Fig4,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 3] = [ScenarioName::Fig2, ScenarioName::Fig3, ScenarioName::Fig4];
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Fig2 => "fig2",
            ScenarioName::Fig3 => "fig3",
            ScenarioName::Fig4 => "fig4",
        })
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.to_string() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown scenario {s:?} (expected fig2, fig3 or fig4)")))
    }
}

/// Default leading coordinate of the `fig2` normals.
pub const FIG2_LEAD: f64 = 0.8;
pub const FIG2_LOG_INV_DELTA: f64 = 40.0;
pub const FIG3_A: f64 = 0.2;
pub const FIG3_ROUNDS: u64 = 10_000;
pub const FIG4_A: f64 = 0.1;
pub const FIG4_LOG_INV_DELTA: f64 = 30.0;
/// Confidence parameter that keeps the stopping rule from ever firing within `FIG3_ROUNDS`.
const NEVER_STOP_LOG_INV_DELTA: f64 = 1e12;

pub fn scenario(name: ScenarioName) -> ExperimentPlan {
    match name {
        ScenarioName::Fig2 => fig2(FIG2_LEAD),
        ScenarioName::Fig3 => fig3(FIG3_A),
        ScenarioName::Fig4 => fig4(FIG4_A),
    }
}

/// Cyclic shifts of `(lead, (1 - lead)/(k - 1), ...)`.
pub fn cyclic_normals(k: usize, lead: f64) -> Vec<Vec<f64>> {
    let rest = (1.0 - lead) / (k - 1) as f64;
    (0..k)
        .map(|m| (0..k).map(|j| if j == m { lead } else { rest }).collect())
        .collect()
}

pub fn fig2(lead: f64) -> ExperimentPlan {
    let k = 10;
    ExperimentPlan {
        name: "fig2".into(),
        problem: ProblemKind::AnyHalfSpace {
            normals: cyclic_normals(k, lead),
        },
        family: FamilyKind::gaussian(1.0),
        mu: vec![-0.1; k],
        strategies: vec![
            StrategyConfig::new(StrategyName::Tas, TrackingMode::C, FIG2_LOG_INV_DELTA),
            StrategyConfig::new(StrategyName::StickyTas, TrackingMode::C, FIG2_LOG_INV_DELTA),
        ],
        replications: 1000,
        master_seed: 2,
        collect: Collect::default(),
    }
}

pub fn fig3(a: f64) -> ExperimentPlan {
    ExperimentPlan {
        name: "fig3".into(),
        problem: ProblemKind::AnyHalfSpace {
            normals: vec![vec![a, 1.0 - a], vec![1.0 - a, a]],
        },
        family: FamilyKind::gaussian(1.0),
        mu: vec![-0.1, -0.1],
        strategies: vec![StrategyConfig {
            max_rounds: FIG3_ROUNDS,
            ..StrategyConfig::new(StrategyName::Tas, TrackingMode::C, NEVER_STOP_LOG_INV_DELTA)
        }],
        replications: 1000,
        master_seed: 3,
        collect: Collect {
            snapshots: vec![100, 300, 1000, 3000, FIG3_ROUNDS],
            interval: Some((1.01 * a, (1.0 - a) / 1.01)),
            proportion_arm: 0,
            ..Default::default()
        },
    }
}

pub fn fig4(a: f64) -> ExperimentPlan {
    ExperimentPlan {
        name: "fig4".into(),
        problem: ProblemKind::Composed {
            blocks: vec![
                BlockKind {
                    arms: vec![0],
                    problem: ProblemKind::AnySign {
                        arms: 1,
                        threshold: 0.0,
                    },
                },
                BlockKind {
                    arms: vec![1, 2],
                    problem: ProblemKind::AnyHalfSpace {
                        normals: vec![vec![a, 1.0 - a], vec![1.0 - a, a]],
                    },
                },
            ],
        },
        family: FamilyKind::gaussian(0.25),
        mu: vec![-0.2; 3],
        strategies: vec![
            StrategyConfig::new(StrategyName::Tas, TrackingMode::D, FIG4_LOG_INV_DELTA),
            StrategyConfig {
                weights: Some(vec![0.5, 0.5 * a, 0.5 * (1.0 - a)]),
                ..StrategyConfig::new(StrategyName::Fixed, TrackingMode::D, FIG4_LOG_INV_DELTA)
            },
        ],
        replications: 500,
        master_seed: 4,
        collect: Collect::default(),
    }
}
