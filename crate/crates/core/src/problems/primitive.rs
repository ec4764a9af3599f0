//! Primitive alternative sets and their best responses.
//!
//! Every alternative set `¬i` used by the problem zoo is a finite union of
//! these primitives, so `inf_{λ ∈ ¬i} D(w, μ, λ)` is a minimum of per-primitive
//! infima, each of which is available in closed form or by a 1-d root search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::FamilyKind;

/// Bounds on a single coordinate of `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordBound {
    pub arm: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl CoordBound {
    pub fn at_least(arm: usize, value: f64) -> Self {
        CoordBound {
            arm,
            lower: Some(value),
            upper: None,
        }
    }

    pub fn at_most(arm: usize, value: f64) -> Self {
        CoordBound {
            arm,
            lower: None,
            upper: Some(value),
        }
    }
}

/// A closed primitive set of bandit models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    /// `{λ : <normal, λ> >= offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Product of per-coordinate intervals; unlisted coordinates are free.
    Box { bounds: Vec<CoordBound> },
    /// `{λ : sum_{k in arms} λ_k^2 = radius^2}`.
    Sphere { arms: Vec<usize>, radius: f64 },
}

/// Minimiser of `D(w, μ, ·)` over a primitive or union of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub lambda: Vec<f64>,
    pub value: f64,
    /// Index of the primitive attaining the infimum, `None` when the set is empty.
    pub primitive: Option<usize>,
}

impl BestResponse {
    pub(crate) fn infeasible(mu: &[f64]) -> Self {
        BestResponse {
            lambda: mu.to_vec(),
            value: f64::INFINITY,
            primitive: None,
        }
    }
}

impl Primitive {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Primitive::HalfSpace { normal, offset } => dot(normal, x) >= *offset,
            Primitive::Box { bounds } => bounds
                .iter()
                .all(|b| b.lower.is_none_or(|l| x[b.arm] >= l) && b.upper.is_none_or(|u| x[b.arm] <= u)),
            Primitive::Sphere { arms, radius } => {
                let n2: f64 = arms.iter().map(|&k| x[k] * x[k]).sum();
                (n2.sqrt() - radius).abs() <= 1e-12
            }
        }
    }

    /// Re-indexes the primitive from a block of arms into a `k`-armed model.
    pub fn lift(&self, block: &[usize], k: usize) -> Primitive {
        match self {
            Primitive::HalfSpace { normal, offset } => {
                let mut full = vec![0.0; k];
                for (j, &a) in normal.iter().enumerate() {
                    full[block[j]] = a;
                }
                Primitive::HalfSpace {
                    normal: full,
                    offset: *offset,
                }
            }
            Primitive::Box { bounds } => Primitive::Box {
                bounds: bounds
                    .iter()
                    .map(|b| CoordBound {
                        arm: block[b.arm],
                        ..b.clone()
                    })
                    .collect(),
            },
            Primitive::Sphere { arms, radius } => Primitive::Sphere {
                arms: arms.iter().map(|&a| block[a]).collect(),
                radius: *radius,
            },
        }
    }

    /// `inf_{λ in self} sum_k w_k d(mu_k, λ_k)`; `w` need not sum to one.
    pub fn best_response(&self, family: &FamilyKind, w: &[f64], mu: &[f64]) -> Result<BestResponse> {
        let (value, lambda) = match self {
            Primitive::Box { bounds } => box_response(family, bounds, w, mu),
            Primitive::HalfSpace { normal, offset } => match family.gaussian_variance() {
                Some(v) => halfspace_gaussian(v, normal, *offset, w, mu),
                None => halfspace_generic(family, normal, *offset, w, mu),
            },
            Primitive::Sphere { arms, radius } => {
                let v = family
                    .gaussian_variance()
                    .ok_or_else(|| Error::NotImplemented(format!("sphere alternative for {} arms", family.name())))?;
                sphere_gaussian(v, arms, *radius, w, mu)
            }
        };
        Ok(BestResponse {
            lambda,
            value,
            primitive: Some(0),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn box_response(family: &FamilyKind, bounds: &[CoordBound], w: &[f64], mu: &[f64]) -> (f64, Vec<f64>) {
    let mut lambda = mu.to_vec();
    let mut value = 0.0;
    for b in bounds {
        let k = b.arm;
        let mut lo = b.lower.unwrap_or(f64::NEG_INFINITY);
        let mut hi = b.upper.unwrap_or(f64::INFINITY);
        if let FamilyKind::Bernoulli = family {
            // Bounds at or past the edge of (0, 1) cannot be met inside the domain.
            if lo >= 1.0 || hi <= 0.0 {
                return (f64::INFINITY, mu.to_vec());
            }
            lo = lo.max(0.0);
            hi = hi.min(1.0);
        }
        if lo > hi {
            return (f64::INFINITY, mu.to_vec());
        }
        let target = mu[k].clamp(lo, hi);
        let target = if family.in_domain(target) {
            target
        } else {
            family.clamp_mean(target)
        };
        if target != mu[k] {
            lambda[k] = target;
            if w[k] > 0.0 {
                value += w[k] * family.divergence(mu[k], target);
            }
        }
    }
    (value, lambda)
}

fn halfspace_gaussian(variance: f64, a: &[f64], b: f64, w: &[f64], mu: &[f64]) -> (f64, Vec<f64>) {
    let gap = b - dot(a, mu);
    if gap <= 0.0 {
        return (0.0, mu.to_vec());
    }
    if a.iter().all(|&x| x == 0.0) {
        return (f64::INFINITY, mu.to_vec());
    }
    // A free coordinate (zero weight, nonzero normal) closes the gap at no cost.
    if let Some(k) = (0..a.len()).find(|&k| a[k] != 0.0 && w[k] <= 0.0) {
        let mut lambda = mu.to_vec();
        lambda[k] += gap / a[k];
        return (0.0, lambda);
    }
    let s: f64 = a
        .iter()
        .zip(w)
        .filter(|(&ak, _)| ak != 0.0)
        .map(|(&ak, &wk)| ak * ak / wk)
        .sum();
    let theta = gap / s;
    let lambda = mu
        .iter()
        .zip(a.iter().zip(w))
        .map(|(&m, (&ak, &wk))| if ak == 0.0 { m } else { m + theta * ak / wk })
        .collect();
    (gap * gap / (2.0 * variance * s), lambda)
}

/// KKT route for non-Gaussian families: `w_k d'(mu_k, λ_k) = θ a_k`, with the
/// multiplier `θ >= 0` found by bisection on `<a, λ(θ)> = b`.
fn halfspace_generic(family: &FamilyKind, a: &[f64], b: f64, w: &[f64], mu: &[f64]) -> (f64, Vec<f64>) {
    if dot(a, mu) >= b {
        return (0.0, mu.to_vec());
    }
    let reach: f64 = a.iter().map(|&ak| ak.max(0.0)).sum();
    if matches!(family, FamilyKind::Bernoulli) && reach <= b {
        return (f64::INFINITY, mu.to_vec());
    }
    let lambda_at = |theta: f64| -> Vec<f64> {
        mu.iter()
            .zip(a.iter().zip(w))
            .map(|(&m, (&ak, &wk))| {
                if ak == 0.0 {
                    m
                } else {
                    family.lambda_for_slope(m, theta * ak / wk.max(1e-12))
                }
            })
            .collect()
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while dot(a, &lambda_at(hi)) < b {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return (f64::INFINITY, mu.to_vec());
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dot(a, &lambda_at(mid)) < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = lambda_at(hi);
    (family.weighted_divergence_unchecked(w, mu, &lambda), lambda)
}

/// Weighted projection onto a sphere: the secular equation
/// `sum_k (w_k mu_k / (w_k - θ))^2 = r^2` with `θ < min_k w_k`.
fn sphere_gaussian(variance: f64, arms: &[usize], radius: f64, w: &[f64], mu: &[f64]) -> (f64, Vec<f64>) {
    let mut lambda = mu.to_vec();
    if arms.is_empty() {
        return (f64::INFINITY, lambda);
    }
    let r2 = radius * radius;
    let wmin = arms.iter().map(|&k| w[k]).fold(f64::INFINITY, f64::min);
    let coord = |k: usize, theta: f64| -> f64 {
        if w[k] <= 0.0 && theta != 0.0 {
            0.0
        } else {
            w[k] * mu[k] / (w[k] - theta)
        }
    };
    let phi = |theta: f64| -> f64 { arms.iter().map(|&k| coord(k, theta).powi(2)).sum() };
    // Hard case: the coordinates sitting at the smallest weight carry no mass.
    let at_min: Vec<usize> = arms.iter().copied().filter(|&k| w[k] == wmin).collect();
    let blows_up = wmin > 0.0 && at_min.iter().any(|&k| mu[k] != 0.0);
    let mut hard_case = false;
    let theta = if blows_up {
        None
    } else {
        let rest: f64 = arms
            .iter()
            .filter(|&&k| w[k] > wmin)
            .map(|&k| (w[k] * mu[k] / (w[k] - wmin)).powi(2))
            .sum();
        if rest <= r2 {
            hard_case = true;
            for &k in arms.iter().filter(|&&k| w[k] > wmin) {
                lambda[k] = w[k] * mu[k] / (w[k] - wmin);
            }
            for &k in &at_min {
                lambda[k] = 0.0;
            }
            lambda[at_min[0]] = (r2 - rest).max(0.0).sqrt();
            Some(wmin)
        } else {
            None
        }
    };
    if !hard_case {
        let theta = theta.unwrap_or_else(|| {
            let mut hi = wmin;
            let mut step = 1.0f64.max(wmin.abs());
            let mut lo = wmin - step;
            while phi(lo) > r2 {
                hi = lo;
                step *= 2.0;
                lo = wmin - step;
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) > r2 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        });
        for &k in arms {
            lambda[k] = coord(k, theta);
        }
        // Snap back onto the sphere to remove bisection residue.
        let n2: f64 = arms.iter().map(|&k| lambda[k] * lambda[k]).sum();
        if n2 > 0.0 {
            let s = radius / n2.sqrt();
            for &k in arms {
                lambda[k] *= s;
            }
        } else {
            lambda[arms[0]] = radius;
        }
    }
    let value: f64 = arms
        .iter()
        .filter(|&&k| w[k] > 0.0)
        .map(|&k| w[k] * (mu[k] - lambda[k]).powi(2))
        .sum::<f64>()
        / (2.0 * variance);
    (value, lambda)
}

/// Best response against a union of primitives; ties go to the lowest index.
pub fn union_best_response(family: &FamilyKind, prims: &[Primitive], w: &[f64], mu: &[f64]) -> Result<BestResponse> {
    let mut best = BestResponse::infeasible(mu);
    for (j, p) in prims.iter().enumerate() {
        let br = p.best_response(family, w, mu)?;
        if br.value < best.value {
            best = BestResponse {
                primitive: Some(j),
                ..br
            };
            if best.value == 0.0 {
                break;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const STD: FamilyKind = FamilyKind::Gaussian { variance: 1.0 };

    /// Dense search along the hyperplane <a, λ> = b, parameterised by λ_1.
    fn grid_hyperplane_2d(a: [f64; 2], b: f64, w: [f64; 2], mu: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        let mut x = -5.0;
        while x <= 5.0 {
            let y = (b - a[0] * x) / a[1];
            let v = w[0] * (mu[0] - x).powi(2) / 2.0 + w[1] * (mu[1] - y).powi(2) / 2.0;
            best = best.min(v);
            x += 1e-3;
        }
        best
    }

    #[test]
    fn hyperplane_example() {
        let p = Primitive::HalfSpace {
            normal: vec![-1.0, 1.0],
            offset: 0.0,
        };
        let br = p.best_response(&STD, &[0.5, 0.5], &[0.3, 0.5]).unwrap();
        // μ already satisfies <a, μ> = 0.2 >= 0
        assert_eq!(br.value, 0.0);
        let p = Primitive::HalfSpace {
            normal: vec![1.0, -1.0],
            offset: 0.0,
        };
        let br = p.best_response(&STD, &[0.5, 0.5], &[0.3, 0.5]).unwrap();
        assert_abs_diff_eq!(br.value, 0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(
            br.value,
            grid_hyperplane_2d([1.0, -1.0], 0.0, [0.5, 0.5], [0.3, 0.5]),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(dot(&[1.0, -1.0], &br.lambda), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            STD.weighted_divergence(&[0.5, 0.5], &[0.3, 0.5], &br.lambda).unwrap(),
            br.value,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_weight_coordinate_is_free() {
        let p = Primitive::HalfSpace {
            normal: vec![1.0, 1.0],
            offset: 3.0,
        };
        let br = p.best_response(&STD, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(br.value, 0.0);
        assert!(p.contains(&br.lambda));
    }

    #[test]
    fn box_and_bernoulli_edges() {
        let p = Primitive::Box {
            bounds: vec![CoordBound::at_least(0, 0.0)],
        };
        let br = p.best_response(&STD, &[1.0, 0.0], &[-1.0, -0.5]).unwrap();
        assert_abs_diff_eq!(br.value, 0.5);
        assert_eq!(br.lambda, vec![0.0, -0.5]);
        let f = FamilyKind::Bernoulli;
        let out = Primitive::Box {
            bounds: vec![CoordBound::at_least(0, 1.5)],
        };
        assert!(out.best_response(&f, &[1.0], &[0.5]).unwrap().value.is_infinite());
        let all = Primitive::Box {
            bounds: vec![CoordBound::at_most(0, 1.5)],
        };
        assert_eq!(all.best_response(&f, &[1.0], &[0.5]).unwrap().value, 0.0);
    }

    #[test]
    fn sphere_from_origin() {
        let p = Primitive::Sphere {
            arms: vec![0, 1],
            radius: 1.0,
        };
        // Hard case: μ = 0, equal weights -> any point on the circle, cost 1/4.
        let br = p.best_response(&STD, &[0.5, 0.5], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(br.value, 0.25, epsilon = 1e-12);
        assert!(p.contains(&br.lambda));
    }

    #[test]
    fn sphere_matches_angle_grid() {
        let p = Primitive::Sphere {
            arms: vec![0, 1],
            radius: 1.0,
        };
        for (w, mu) in [
            ([0.3, 0.7], [0.2, -0.4]),
            ([0.5, 0.5], [2.0, 0.0]),
            ([0.9, 0.1], [0.0, 1.5]),
            ([1.0, 0.0], [0.3, 0.1]),
        ] {
            let br = p.best_response(&STD, &w, &mu).unwrap();
            let n = 200_000;
            let grid = (0..n)
                .map(|i| {
                    let t = i as f64 * std::f64::consts::TAU / n as f64;
                    let l = [t.cos(), t.sin()];
                    STD.weighted_divergence_unchecked(&w, &mu, &l)
                })
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(br.value, grid, epsilon = 1e-6);
            assert!(p.contains(&br.lambda));
        }
    }

    #[test]
    fn sphere_needs_gaussian() {
        let p = Primitive::Sphere {
            arms: vec![0],
            radius: 1.0,
        };
        assert!(matches!(
            p.best_response(&FamilyKind::Bernoulli, &[1.0], &[0.5]),
            Err(Error::NotImplemented(_))
        ));
    }

    #[test]
    fn lift_reindexes() {
        let p = Primitive::HalfSpace {
            normal: vec![0.3, 0.7],
            offset: 0.0,
        };
        assert_eq!(
            p.lift(&[1, 2], 3),
            Primitive::HalfSpace {
                normal: vec![0.0, 0.3, 0.7],
                offset: 0.0
            }
        );
    }

    proptest! {
        #[test]
        fn bernoulli_halfspace_beats_random_feasible_points(
            mu in prop::collection::vec(0.05f64..0.95, 3),
            w in prop::collection::vec(0.05f64..1.0, 3),
            a in prop::collection::vec(-1.0f64..1.0, 3),
            probes in prop::collection::vec(prop::collection::vec(0.001f64..0.999, 3), 50),
        ) {
            let f = FamilyKind::Bernoulli;
            let b = dot(&a, &mu) + 0.05;
            let p = Primitive::HalfSpace { normal: a.clone(), offset: b };
            let br = p.best_response(&f, &w, &mu).unwrap();
            if br.value.is_finite() {
                prop_assert!(dot(&a, &br.lambda) >= b - 1e-9);
                for x in probes.iter().filter(|x| dot(&a, x) >= b) {
                    prop_assert!(f.weighted_divergence_unchecked(&w, &mu, x) >= br.value - 1e-9);
                }
            }
        }

        #[test]
        fn gaussian_halfspace_beats_random_feasible_points(
            mu in prop::collection::vec(-1.0f64..1.0, 3),
            w in prop::collection::vec(0.05f64..1.0, 3),
            a in prop::collection::vec(-1.0f64..1.0, 3),
            probes in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 50),
        ) {
            let b = dot(&a, &mu) + 0.3;
            let p = Primitive::HalfSpace { normal: a.clone(), offset: b };
            let br = p.best_response(&STD, &w, &mu).unwrap();
            prop_assert!((STD.weighted_divergence_unchecked(&w, &mu, &br.lambda) - br.value).abs() <= 1e-9);
            for x in probes.iter().filter(|x| dot(&a, x) >= b) {
                prop_assert!(STD.weighted_divergence_unchecked(&w, &mu, x) >= br.value - 1e-9);
            }
        }
    }
}
