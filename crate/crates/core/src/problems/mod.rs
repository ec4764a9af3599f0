//! Pure-exploration problems: answer sets, correctness, alternative sets.
//!
//! A problem is described by a serialisable [`ProblemKind`] and compiled into a
//! [`ProblemSpec`], which fixes the declaration order of answers and the
//! alternative set of every answer as a union of [`Primitive`]s.

pub mod primitive;
pub mod region;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::expfam::FamilyKind;

pub use primitive::{union_best_response, BestResponse, CoordBound, Primitive};
pub use region::{Polyhedron, Proximity, Region};

/// Index of an answer in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnswerId(pub usize);

/// Most arms allowed for the thresholding bandit (its answers are all subsets).
pub const MAX_SUBSET_ARMS: usize = 16;

fn default_radius() -> f64 {
    1.0
}

/// Serialisable problem description. Arm indices inside `blocks` are 0-based;
/// arm numbers in answer labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemKind {
    /// Answers: arms whose mean is within `epsilon` of the largest.
    EpsBestArm {
        arms: usize,
        #[serde(default)]
        epsilon: f64,
    },
    /// Answer: the set of arms with mean at most `threshold`.
    ThresholdingBandit { arms: usize, threshold: f64 },
    /// Answers `lo` (some mean <= threshold + epsilon) and `hi` (all means >= threshold - epsilon).
    EpsMinimumThreshold {
        arms: usize,
        threshold: f64,
        #[serde(default)]
        epsilon: f64,
    },
    /// Answers: any arm with mean <= threshold, or `no` if all means are >= threshold.
    AnyLowArm { arms: usize, threshold: f64 },
    /// Answers: any arm together with the side of `threshold` its mean lies on.
    AnySign { arms: usize, threshold: f64 },
    /// Answers: any normal `u_m` together with the sign of `mu . u_m`.
    #[serde(rename = "any_halfspace")]
    AnyHalfSpace { normals: Vec<Vec<f64>> },
    /// Single answer whose alternative is the sphere of the given radius.
    SphereDemo {
        arms: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// Product of independent problems on disjoint groups of arms.
    Composed { blocks: Vec<BlockKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockKind {
    pub arms: Vec<usize>,
    pub problem: ProblemKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub arms: Vec<usize>,
    pub spec: ProblemSpec,
}

/// A compiled problem with answers in a fixed declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    kind: ProblemKind,
    arms: usize,
    labels: Vec<String>,
    alternatives: Vec<Vec<Primitive>>,
    blocks: Vec<Block>,
}

fn unit(k: usize, i: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[i] = s;
    v
}

fn check_arms(arms: usize) -> Result<()> {
    if arms == 0 {
        Err(Error::Invalid("a problem needs at least one arm".into()))
    } else {
        Ok(())
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be finite, got {x}")))
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    check_finite("epsilon", eps)?;
    if eps < 0.0 {
        return Err(Error::Invalid(format!("epsilon must be non-negative, got {eps}")));
    }
    Ok(())
}

fn subset_label(mask: usize, k: usize) -> String {
    let members: Vec<String> = (0..k)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| (i + 1).to_string())
        .collect();
    format!("set:{{{}}}", members.join(","))
}

fn sign_char(s: usize) -> char {
    if s == 0 {
        '-'
    } else {
        '+'
    }
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Result<Self> {
        let mut kind = kind;
        let mut blocks = Vec::new();
        let (arms, labels, alternatives) = match &mut kind {
            ProblemKind::EpsBestArm { arms, epsilon } => {
                let (k, eps) = (*arms, *epsilon);
                check_arms(k)?;
                check_epsilon(eps)?;
                let labels = (1..=k).map(|i| format!("arm:{i}")).collect();
                let alts = (0..k)
                    .map(|i| {
                        (0..k)
                            .filter(|&j| j != i)
                            .map(|j| {
                                let mut a = unit(k, j, 1.0);
                                a[i] = -1.0;
                                Primitive::HalfSpace { normal: a, offset: eps }
                            })
                            .collect()
                    })
                    .collect();
                (k, labels, alts)
            }
            ProblemKind::ThresholdingBandit { arms, threshold } => {
                let (k, g) = (*arms, *threshold);
                check_arms(k)?;
                check_finite("threshold", g)?;
                if k > MAX_SUBSET_ARMS {
                    return Err(Error::Invalid(format!(
                        "thresholding bandit supports at most {MAX_SUBSET_ARMS} arms, got {k}"
                    )));
                }
                let n = 1usize << k;
                let labels = (0..n).map(|m| subset_label(m, k)).collect();
                let alts = (0..n)
                    .map(|m| {
                        (0..k)
                            .map(|i| Primitive::Box {
                                bounds: vec![if m >> i & 1 == 1 {
                                    CoordBound::at_least(i, g)
                                } else {
                                    CoordBound::at_most(i, g)
                                }],
                            })
                            .collect()
                    })
                    .collect();
                (k, labels, alts)
            }
            ProblemKind::EpsMinimumThreshold {
                arms,
                threshold,
                epsilon,
            } => {
                let (k, g, eps) = (*arms, *threshold, *epsilon);
                check_arms(k)?;
                check_finite("threshold", g)?;
                check_epsilon(eps)?;
                let lo = vec![Primitive::Box {
                    bounds: (0..k).map(|i| CoordBound::at_least(i, g + eps)).collect(),
                }];
                let hi = (0..k)
                    .map(|i| Primitive::Box {
                        bounds: vec![CoordBound::at_most(i, g - eps)],
                    })
                    .collect();
                (k, vec!["lo".into(), "hi".into()], vec![lo, hi])
            }
            ProblemKind::AnyLowArm { arms, threshold } => {
                let (k, g) = (*arms, *threshold);
                check_arms(k)?;
                check_finite("threshold", g)?;
                let mut labels = vec!["no".to_string()];
                labels.extend((1..=k).map(|i| format!("arm:{i}")));
                let mut alts = vec![(0..k)
                    .map(|i| Primitive::Box {
                        bounds: vec![CoordBound::at_most(i, g)],
                    })
                    .collect::<Vec<_>>()];
                alts.extend((0..k).map(|i| {
                    vec![Primitive::Box {
                        bounds: vec![CoordBound::at_least(i, g)],
                    }]
                }));
                (k, labels, alts)
            }
            ProblemKind::AnySign { arms, threshold } => {
                let (k, g) = (*arms, *threshold);
                check_arms(k)?;
                check_finite("threshold", g)?;
                let mut labels = Vec::new();
                let mut alts = Vec::new();
                for i in 0..k {
                    labels.push(format!("sign:({},lo)", i + 1));
                    alts.push(vec![Primitive::Box {
                        bounds: vec![CoordBound::at_least(i, g)],
                    }]);
                    labels.push(format!("sign:({},hi)", i + 1));
                    alts.push(vec![Primitive::Box {
                        bounds: vec![CoordBound::at_most(i, g)],
                    }]);
                }
                (k, labels, alts)
            }
            ProblemKind::AnyHalfSpace { normals } => {
                let k = normals.first().map_or(0, Vec::len);
                check_arms(k)?;
                for (m, u) in normals.iter_mut().enumerate() {
                    check_len("normal", k, u.len())?;
                    if let Some(&x) = u.iter().find(|x| !x.is_finite()) {
                        return Err(Error::Invalid(format!("normal {} has non-finite entry {x}", m + 1)));
                    }
                    let n1: f64 = u.iter().map(|x| x.abs()).sum();
                    if n1 == 0.0 {
                        return Err(Error::Invalid(format!("normal {} is zero", m + 1)));
                    }
                    if (n1 - 1.0).abs() > 1e-9 {
                        log::warn!("normal {} has l1 norm {n1}; rescaling to 1", m + 1);
                        u.iter_mut().for_each(|x| *x /= n1);
                    }
                }
                let mut labels = Vec::new();
                let mut alts = Vec::new();
                for (m, u) in normals.iter().enumerate() {
                    for s in 0..2 {
                        let sign = if s == 0 { -1.0 } else { 1.0 };
                        labels.push(format!("halfspace:({},{})", m + 1, sign_char(s)));
                        alts.push(vec![Primitive::HalfSpace {
                            normal: u.iter().map(|x| -sign * x).collect(),
                            offset: 0.0,
                        }]);
                    }
                }
                (k, labels, alts)
            }
            ProblemKind::SphereDemo { arms, radius } => {
                let k = *arms;
                check_arms(k)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Invalid(format!("sphere radius must be positive, got {radius}")));
                }
                let alt = vec![Primitive::Sphere {
                    arms: (0..k).collect(),
                    radius: *radius,
                }];
                (k, vec!["off_sphere".into()], vec![alt])
            }
            ProblemKind::Composed { blocks: parts } => {
                if parts.is_empty() {
                    return Err(Error::Invalid("composition needs at least one block".into()));
                }
                let k: usize = parts.iter().map(|b| b.arms.len()).sum();
                let mut seen = vec![false; k];
                for b in parts.iter() {
                    for &a in &b.arms {
                        if a >= k || seen[a] {
                            return Err(Error::Invalid(format!(
                                "block arms must partition 0..{k}; arm index {a} is out of range or repeated"
                            )));
                        }
                        seen[a] = true;
                    }
                    let spec = ProblemSpec::new(b.problem.clone())?;
                    check_len("block arms", spec.arms(), b.arms.len())?;
                    blocks.push(Block {
                        arms: b.arms.clone(),
                        spec,
                    });
                }
                for (b, part) in blocks.iter().zip(parts.iter_mut()) {
                    part.problem = b.spec.kind.clone();
                }
                let total: usize = blocks.iter().map(|b| b.spec.num_answers()).product();
                if total > 1 << 20 {
                    return Err(Error::Invalid(format!("composition has too many answers ({total})")));
                }
                let mut labels = Vec::with_capacity(total);
                let mut alts = Vec::with_capacity(total);
                for idx in 0..total {
                    let parts = decode(&blocks, idx);
                    let names: Vec<&str> = blocks
                        .iter()
                        .zip(&parts)
                        .map(|(b, &i)| b.spec.labels[i].as_str())
                        .collect();
                    labels.push(format!("({})", names.join(",")));
                    alts.push(
                        blocks
                            .iter()
                            .zip(&parts)
                            .flat_map(|(b, &i)| b.spec.alternatives[i].iter().map(|p| p.lift(&b.arms, k)))
                            .collect(),
                    );
                }
                (k, labels, alts)
            }
        };
        Ok(ProblemSpec {
            kind,
            arms,
            labels,
            alternatives,
            blocks,
        })
    }

    /// Product problem with `a` on the first arms and `b` on the remaining ones.
    pub fn compose(a: &ProblemSpec, b: &ProblemSpec) -> Result<Self> {
        let ka = a.arms();
        ProblemSpec::new(ProblemKind::Composed {
            blocks: vec![
                BlockKind {
                    arms: (0..ka).collect(),
                    problem: a.kind.clone(),
                },
                BlockKind {
                    arms: (ka..ka + b.arms()).collect(),
                    problem: b.kind.clone(),
                },
            ],
        })
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn num_answers(&self) -> usize {
        self.labels.len()
    }

    pub fn answers(&self) -> impl Iterator<Item = AnswerId> {
        (0..self.labels.len()).map(AnswerId)
    }

    pub fn label(&self, answer: AnswerId) -> &str {
        &self.labels[answer.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn answer_by_label(&self, label: &str) -> Option<AnswerId> {
        self.labels.iter().position(|l| l == label).map(AnswerId)
    }

    /// Alternative set `¬answer` as a union of primitives.
    pub fn alternative(&self, answer: AnswerId) -> &[Primitive] {
        &self.alternatives[answer.0]
    }

    /// Sub-problems of a composition; empty otherwise.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Per-block answer indices of a composed answer.
    pub fn decompose(&self, answer: AnswerId) -> Vec<AnswerId> {
        decode(&self.blocks, answer.0).into_iter().map(AnswerId).collect()
    }

    pub fn check_answer(&self, answer: AnswerId) -> Result<()> {
        if answer.0 < self.num_answers() {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "answer index {} out of range (problem has {} answers)",
                answer.0,
                self.num_answers()
            )))
        }
    }

    pub fn check_mu(&self, family: &FamilyKind, mu: &[f64]) -> Result<()> {
        check_len("mean vector", self.arms, mu.len())?;
        family.check_means(mu)
    }

    /// Whether `answer` is correct for `mu` (closed correctness sets).
    pub fn is_correct(&self, answer: AnswerId, mu: &[f64]) -> bool {
        let i = answer.0;
        let min = || mu.iter().copied().fold(f64::INFINITY, f64::min);
        match &self.kind {
            ProblemKind::EpsBestArm { epsilon, .. } => {
                let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                mu[i] >= max - epsilon
            }
            ProblemKind::ThresholdingBandit { threshold, .. } => {
                (0..mu.len()).all(|k| (i >> k & 1 == 1) == (mu[k] <= *threshold))
            }
            ProblemKind::EpsMinimumThreshold { threshold, epsilon, .. } => {
                if i == 0 {
                    min() <= threshold + epsilon
                } else {
                    min() >= threshold - epsilon
                }
            }
            ProblemKind::AnyLowArm { threshold, .. } => {
                if i == 0 {
                    min() >= *threshold
                } else {
                    mu[i - 1] <= *threshold
                }
            }
            ProblemKind::AnySign { threshold, .. } => {
                let k = i / 2;
                if i.is_multiple_of(2) {
                    mu[k] <= *threshold
                } else {
                    mu[k] >= *threshold
                }
            }
            ProblemKind::AnyHalfSpace { normals } => {
                let p = primitive::dot(&normals[i / 2], mu);
                if i.is_multiple_of(2) {
                    p <= 0.0
                } else {
                    p >= 0.0
                }
            }
            ProblemKind::SphereDemo { radius, .. } => {
                let n: f64 = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
                n != *radius
            }
            ProblemKind::Composed { .. } => {
                let parts = decode(&self.blocks, i);
                self.blocks.iter().zip(parts).all(|(b, j)| {
                    let sub: Vec<f64> = b.arms.iter().map(|&a| mu[a]).collect();
                    b.spec.is_correct(AnswerId(j), &sub)
                })
            }
        }
    }

    /// The correct answers `i*(mu)` in declaration order.
    pub fn correct_answers(&self, family: &FamilyKind, mu: &[f64]) -> Result<Vec<AnswerId>> {
        self.check_mu(family, mu)?;
        let out: Vec<AnswerId> = self.answers().filter(|&a| self.is_correct(a, mu)).collect();
        if out.is_empty() {
            return Err(Error::Invariant(format!("no correct answer for mean vector {mu:?}")));
        }
        Ok(out)
    }

    /// `inf_{λ in ¬answer} sum_k w_k d(mu_k, λ_k)` and a minimiser.
    pub fn best_response(&self, family: &FamilyKind, answer: AnswerId, w: &[f64], mu: &[f64]) -> Result<BestResponse> {
        self.check_answer(answer)?;
        self.check_mu(family, mu)?;
        check_len("weights", self.arms, w.len())?;
        if let Some(&bad) = w.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Invalid(format!(
                "weights must be finite and non-negative, got {bad}"
            )));
        }
        union_best_response(family, self.alternative(answer), w, mu)
    }

    /// Polyhedral cover of the means for which `answer` is an oracle answer
    /// (exact where the comparison of closed-form oracle values is linear,
    /// the correctness set of the answer otherwise).
    pub fn oracle_region(&self, family: &FamilyKind, answer: AnswerId) -> Region {
        let k = self.arms;
        let gaussian = family.gaussian_variance().is_some();
        let single = |rows: Vec<(Vec<f64>, f64)>| {
            let mut p = Polyhedron::whole();
            for (a, b) in rows {
                p.push(a, b);
            }
            p
        };
        let i = answer.0;
        match &self.kind {
            ProblemKind::EpsBestArm { epsilon, .. } => Region {
                pieces: vec![single(
                    (0..k)
                        .filter(|&j| j != i)
                        .map(|j| {
                            let mut a = unit(k, i, 1.0);
                            a[j] = -1.0;
                            (a, -epsilon)
                        })
                        .collect(),
                )],
                exact: *epsilon == 0.0,
            },
            ProblemKind::ThresholdingBandit { threshold, .. } => Region {
                pieces: vec![single(
                    (0..k)
                        .map(|j| {
                            if i >> j & 1 == 1 {
                                (unit(k, j, -1.0), -threshold)
                            } else {
                                (unit(k, j, 1.0), *threshold)
                            }
                        })
                        .collect(),
                )],
                exact: true,
            },
            ProblemKind::EpsMinimumThreshold { threshold, epsilon, .. } => {
                let pieces = if i == 0 {
                    (0..k)
                        .map(|j| single(vec![(unit(k, j, -1.0), -(threshold + epsilon))]))
                        .collect()
                } else {
                    vec![single((0..k).map(|j| (unit(k, j, 1.0), threshold - epsilon)).collect())]
                };
                Region {
                    pieces,
                    exact: *epsilon == 0.0,
                }
            }
            ProblemKind::AnyLowArm { threshold, .. } => {
                let piece = if i == 0 {
                    single((0..k).map(|j| (unit(k, j, 1.0), *threshold)).collect())
                } else {
                    let m = i - 1;
                    let mut rows = vec![(unit(k, m, -1.0), -threshold)];
                    rows.extend((0..k).filter(|&j| j != m).map(|j| {
                        let mut a = unit(k, j, 1.0);
                        a[m] = -1.0;
                        (a, 0.0)
                    }));
                    single(rows)
                };
                Region {
                    pieces: vec![piece],
                    exact: true,
                }
            }
            ProblemKind::AnySign { threshold, .. } => {
                let (m, s) = (i / 2, if i.is_multiple_of(2) { -1.0 } else { 1.0 });
                // s (x_m - g) >= 0 and, for Gaussians, s (x_m - g) >= |x_j - g|
                let mut rows = vec![(unit(k, m, s), s * threshold)];
                if gaussian {
                    for j in (0..k).filter(|&j| j != m) {
                        for t in [-1.0, 1.0] {
                            let mut a = unit(k, m, s);
                            a[j] = -t;
                            rows.push((a, threshold * (s - t)));
                        }
                    }
                }
                Region {
                    pieces: vec![single(rows)],
                    exact: gaussian,
                }
            }
            ProblemKind::AnyHalfSpace { normals } => {
                let (m, s) = (i / 2, if i.is_multiple_of(2) { -1.0 } else { 1.0 });
                let um: Vec<f64> = normals[m].iter().map(|x| s * x).collect();
                let mut rows = vec![(um.clone(), 0.0)];
                if gaussian {
                    for (_, u) in normals.iter().enumerate().filter(|&(j, _)| j != m) {
                        for t in [-1.0, 1.0] {
                            rows.push((um.iter().zip(u).map(|(a, b)| a - t * b).collect(), 0.0));
                        }
                    }
                }
                Region {
                    pieces: vec![single(rows)],
                    exact: gaussian,
                }
            }
            ProblemKind::SphereDemo { .. } => Region::whole(),
            ProblemKind::Composed { .. } => {
                let parts = decode(&self.blocks, i);
                let regions: Vec<(&[usize], Region)> = self
                    .blocks
                    .iter()
                    .zip(parts)
                    .map(|(b, j)| (b.arms.as_slice(), b.spec.oracle_region(family, AnswerId(j))))
                    .collect();
                Region::product(&regions, k)
            }
        }
    }
}

fn decode(blocks: &[Block], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; blocks.len()];
    for (slot, b) in out.iter_mut().zip(blocks).rev() {
        let n = b.spec.num_answers();
        *slot = idx % n;
        idx /= n;
    }
    out
}
