//! Closed-form oracle weights for single half-spaces, unions of one-sided
//! coordinate constraints, boxes, spheres and compositions of those.

use crate::error::Result;
use crate::expfam::FamilyKind;
use crate::problems::primitive::dot;
use crate::problems::{AnswerId, CoordBound, Primitive, ProblemSpec};

/// Value and representative maximisers; `None` when no closed form applies.
pub(crate) type Closed = Option<(f64, Vec<Vec<f64>>)>;

/// Cap on the number of representatives produced by products of ties.
const MAX_REPRESENTATIVES: usize = 64;

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn unit(k: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[i] = 1.0;
    v
}

pub(crate) fn closed_form(spec: &ProblemSpec, family: &FamilyKind, mu: &[f64], answer: AnswerId) -> Result<Closed> {
    if !spec.blocks().is_empty() {
        return composed(spec, family, mu, answer);
    }
    let k = spec.arms();
    let prims = spec.alternative(answer);
    if prims.is_empty() {
        return Ok(Some((f64::INFINITY, vec![uniform(k)])));
    }
    if let [p] = prims {
        return match p {
            Primitive::HalfSpace { normal, offset } => Ok(family
                .gaussian_variance()
                .map(|v| halfspace(v, normal, *offset, mu))
                .map(|(x, w)| (x, vec![w]))),
            Primitive::Box { bounds } => box_form(family, p, bounds, mu, k).map(Some),
            Primitive::Sphere { arms, radius } => Ok(family
                .gaussian_variance()
                .filter(|_| arms.len() == k)
                .map(|v| sphere(v, *radius, mu))
                .map(|(x, w)| (x, vec![w]))),
        };
    }
    one_sided_union(family, prims, mu, k)
}

fn halfspace(variance: f64, a: &[f64], b: f64, mu: &[f64]) -> (f64, Vec<f64>) {
    let n1: f64 = a.iter().map(|x| x.abs()).sum();
    if n1 == 0.0 {
        let v = if b <= 0.0 { 0.0 } else { f64::INFINITY };
        return (v, uniform(mu.len()));
    }
    let w: Vec<f64> = a.iter().map(|x| x.abs() / n1).collect();
    let gap = b - dot(a, mu);
    let value = if gap <= 0.0 {
        0.0
    } else {
        (gap / n1).powi(2) / (2.0 * variance)
    };
    (value, w)
}

/// Cost of moving coordinate `arm` alone into the primitive.
fn single_cost(family: &FamilyKind, p: &Primitive, arm: usize, mu: &[f64], k: usize) -> Result<f64> {
    Ok(p.best_response(family, &unit(k, arm), mu)?.value)
}

fn box_form(
    family: &FamilyKind,
    p: &Primitive,
    bounds: &[CoordBound],
    mu: &[f64],
    k: usize,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if p.best_response(family, &uniform(k), mu)?.value.is_infinite() {
        return Ok((f64::INFINITY, vec![uniform(k)]));
    }
    if bounds.is_empty() {
        return Ok((0.0, vec![uniform(k)]));
    }
    let costs = bounds
        .iter()
        .map(|b| {
            let only = Primitive::Box {
                bounds: vec![b.clone()],
            };
            single_cost(family, &only, b.arm, mu, k)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = costs.iter().copied().fold(0.0, f64::max);
    if best == 0.0 {
        // μ is inside the box; keep the weights continuous by pointing at
        // the coordinate nearest to leaving it.
        let slack = |b: &CoordBound| {
            let lo = b.lower.map_or(f64::INFINITY, |l| mu[b.arm] - l);
            let hi = b.upper.map_or(f64::INFINITY, |u| u - mu[b.arm]);
            lo.min(hi)
        };
        let nearest = bounds
            .iter()
            .min_by(|x, y| slack(x).total_cmp(&slack(y)))
            .map(|b| b.arm)
            .unwrap_or(0);
        return Ok((0.0, vec![unit(k, nearest)]));
    }
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for (b, &c) in bounds.iter().zip(&costs) {
        if c >= best * (1.0 - 1e-12) && !reps.iter().any(|r| r[b.arm] == 1.0) {
            reps.push(unit(k, b.arm));
        }
    }
    Ok((best, reps))
}

/// Union of primitives that each constrain one coordinate on one side, all on
/// distinct coordinates: `1 / D = sum_j 1 / c_j`, `w_j ∝ 1 / c_j`.
fn one_sided_union(family: &FamilyKind, prims: &[Primitive], mu: &[f64], k: usize) -> Result<Closed> {
    let mut arms = Vec::with_capacity(prims.len());
    for p in prims {
        match p {
            Primitive::Box { bounds } if bounds.len() == 1 => {
                let b = &bounds[0];
                if b.lower.is_some() == b.upper.is_some() || arms.contains(&b.arm) {
                    return Ok(None);
                }
                arms.push(b.arm);
            }
            _ => return Ok(None),
        }
    }
    let costs = prims
        .iter()
        .zip(&arms)
        .map(|(p, &a)| single_cost(family, p, a, mu, k))
        .collect::<Result<Vec<f64>>>()?;
    let zeros: Vec<usize> = arms
        .iter()
        .zip(&costs)
        .filter(|(_, &c)| c == 0.0)
        .map(|(&a, _)| a)
        .collect();
    if !zeros.is_empty() {
        let mut w = vec![0.0; k];
        for &a in &zeros {
            w[a] = 1.0 / zeros.len() as f64;
        }
        return Ok(Some((0.0, vec![w])));
    }
    let inv: f64 = costs.iter().map(|c| 1.0 / c).sum();
    if inv == 0.0 {
        return Ok(Some((f64::INFINITY, vec![uniform(k)])));
    }
    let mut w = vec![0.0; k];
    for (&a, &c) in arms.iter().zip(&costs) {
        w[a] = (1.0 / c) / inv;
    }
    Ok(Some((1.0 / inv, vec![w])))
}

/// Divergence to the sphere of radius `r` around the origin, by rescaling
/// to the unit sphere and dropping the smallest `|mu_k|` while the
/// interior-solution condition fails.
fn sphere(variance: f64, r: f64, mu: &[f64]) -> (f64, Vec<f64>) {
    let k = mu.len();
    let x: Vec<f64> = mu.iter().map(|m| m / r).collect();
    let mut active: Vec<usize> = (0..k).collect();
    loop {
        let n = active.len() as f64;
        let l1: f64 = active.iter().map(|&i| x[i].abs()).sum();
        let l2: f64 = active.iter().map(|&i| x[i] * x[i]).sum();
        let min_abs = active.iter().map(|&i| x[i].abs()).fold(f64::INFINITY, f64::min);
        let rhs = l1 * l1 - n * (l2 - 1.0);
        if active.len() == 1 || (rhs >= 0.0 && (l1 - n * min_abs).powi(2) <= rhs) {
            let s = rhs.max(0.0).sqrt();
            let value = (s - l1).powi(2) / (2.0 * n * n) * r * r / variance;
            let mut w = vec![0.0; k];
            for &i in &active {
                w[i] = if s > 0.0 {
                    1.0 / n + (x[i].abs() - l1 / n) / s
                } else {
                    1.0 / n
                };
            }
            return (value, w);
        }
        let drop = active
            .iter()
            .enumerate()
            .min_by(|a, b| x[*a.1].abs().total_cmp(&x[*b.1].abs()))
            .map(|(pos, _)| pos)
            .unwrap_or(0);
        active.remove(drop);
    }
}

fn composed(spec: &ProblemSpec, family: &FamilyKind, mu: &[f64], answer: AnswerId) -> Result<Closed> {
    let k = spec.arms();
    let mut parts = Vec::new();
    for (block, sub) in spec.blocks().iter().zip(spec.decompose(answer)) {
        let sub_mu: Vec<f64> = block.arms.iter().map(|&a| mu[a]).collect();
        match closed_form(&block.spec, family, &sub_mu, sub)? {
            Some(c) => parts.push(c),
            None => return Ok(None),
        }
    }
    let values: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let zero = values.iter().filter(|&&v| v == 0.0).count();
    let mass: Vec<f64> = if zero > 0 {
        values
            .iter()
            .map(|&v| if v == 0.0 { 1.0 / zero as f64 } else { 0.0 })
            .collect()
    } else {
        let inv: f64 = values.iter().map(|v| 1.0 / v).sum();
        if inv == 0.0 {
            return Ok(Some((f64::INFINITY, vec![uniform(k)])));
        }
        values.iter().map(|v| (1.0 / v) / inv).collect()
    };
    let value = if zero > 0 {
        0.0
    } else {
        1.0 / values.iter().map(|v| 1.0 / v).sum::<f64>()
    };
    let mut reps = vec![vec![0.0; k]];
    for ((block, (_, block_reps)), &m) in spec.blocks().iter().zip(&parts).zip(&mass) {
        let mut next = Vec::new();
        for base in &reps {
            for br in block_reps {
                if next.len() >= MAX_REPRESENTATIVES {
                    break;
                }
                let mut w = base.clone();
                for (j, &a) in block.arms.iter().enumerate() {
                    w[a] = m * br[j];
                }
                next.push(w);
            }
        }
        reps = next;
    }
    Ok(Some((value, reps)))
}
