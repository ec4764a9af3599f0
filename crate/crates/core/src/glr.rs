//! Generalised likelihood ratio stopping and the candidate oracle answers.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::expfam::FamilyKind;
use crate::oracle::{solve_global, SolveOptions};
use crate::problems::{AnswerId, ProblemSpec, Proximity};

/// Stopping threshold `β(t, δ) = ln(C t² / δ)`. The confidence level is stored
/// as `ln(1/δ)` so that levels like `δ = e^{-800}` stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub constant: f64,
    pub log_inv_delta: f64,
    /// Whether `constant` satisfies the fixed-point inequality for the arm count.
    pub certified: bool,
}

impl Threshold {
    /// A user-supplied constant; not certified.
    pub fn with_constant(constant: f64, log_inv_delta: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::Invalid(format!(
                "threshold constant must be positive, got {constant}"
            )));
        }
        if !(log_inv_delta > 0.0 && log_inv_delta.is_finite()) {
            return Err(Error::Invalid(format!(
                "ln(1/delta) must be positive and finite, got {log_inv_delta}"
            )));
        }
        Ok(Threshold {
            constant,
            log_inv_delta,
            certified: false,
        })
    }

    /// The smallest constant of the form `e * 1.5^j` passing the fixed-point check for `k` arms.
    pub fn certified(k: usize, log_inv_delta: f64) -> Result<Self> {
        let mut th = Threshold::with_constant(certified_constant(k), log_inv_delta)?;
        th.certified = true;
        Ok(th)
    }

    pub fn delta(&self) -> f64 {
        (-self.log_inv_delta).exp()
    }

    pub fn beta(&self, t: u64) -> f64 {
        self.constant.ln() + 2.0 * (t as f64).ln() + self.log_inv_delta
    }

    /// `ln f(t) = ln(C t^10)`, the radius of the small confidence region.
    pub fn log_f(&self, t: u64) -> f64 {
        self.constant.ln() + 10.0 * (t as f64).ln()
    }
}

/// Number of series terms summed explicitly before the integral tail bound.
const SERIES_TERMS: u64 = 1_000_000;

/// `e * sum_{t >= 1} (e/K)^K (ln²(C t²) ln t)^K / t²`, an upper bound.
pub fn threshold_series(c: f64, k: usize) -> f64 {
    let kf = k as f64;
    let lc = c.ln();
    let term = |t: f64| -> f64 {
        let l = t.ln();
        (kf * ((std::f64::consts::E / kf).ln() + 2.0 * (lc + 2.0 * l).ln() + l.ln()) - 2.0 * l).exp()
    };
    // Sum until the summand is decreasing for good: (ln g)'(s) < 2 with s = ln t.
    let decreasing = |t: f64| {
        let s = t.ln();
        kf * (4.0 / (lc + 2.0 * s) + 1.0 / s) < 2.0
    };
    let mut sum = 0.0;
    let mut t = 2u64;
    while t <= SERIES_TERMS || !decreasing(t as f64) {
        sum += term(t as f64);
        t += 1;
    }
    let tail = integral_tail(lc, k, ((t - 1) as f64).ln());
    std::f64::consts::E * (sum + tail)
}

/// `∫_S^∞ g(s) e^{-s} ds = e^{-S} sum_j g^{(j)}(S)` for the polynomial
/// `g(s) = (e/K)^K (c + 2s)^{2K} s^K`, via its Taylor coefficients at `S`.
fn integral_tail(c: f64, k: usize, s0: f64) -> f64 {
    let a = c + 2.0 * s0;
    // (a + 2u)^{2K} and (s0 + u)^K as coefficient vectors in u
    let p1 = binomial_poly(a, 2.0, 2 * k);
    let p2 = binomial_poly(s0, 1.0, k);
    let mut prod = vec![0.0; p1.len() + p2.len() - 1];
    for (i, x) in p1.iter().enumerate() {
        for (j, y) in p2.iter().enumerate() {
            prod[i + j] += x * y;
        }
    }
    let mut fact = 1.0;
    let mut total = 0.0;
    for (j, coef) in prod.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        total += coef * fact;
    }
    let kf = k as f64;
    (kf * (std::f64::consts::E / kf).ln() - s0).exp() * total
}

/// Coefficients of `(x + y u)^n` in powers of `u`.
fn binomial_poly(x: f64, y: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut binom = 1.0;
    for j in 0..=n {
        if j > 0 {
            binom *= (n - j + 1) as f64 / j as f64;
        }
        out.push(binom * x.powi((n - j) as i32) * y.powi(j as i32));
    }
    out
}

/// Cached per arm count.
pub fn certified_constant(k: usize) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&k) {
        return c;
    }
    let mut c = std::f64::consts::E;
    while c < threshold_series(c, k) {
        c *= 1.5;
    }
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(k, c);
    c
}

fn ordered(spec: &ProblemSpec, order: Option<&[AnswerId]>) -> Vec<AnswerId> {
    order.map_or_else(|| spec.answers().collect(), <[AnswerId]>::to_vec)
}

fn check_counts(spec: &ProblemSpec, counts: &[u64], mu_hat: &[f64]) -> Result<()> {
    check_len("counts", spec.arms(), counts.len())?;
    check_len("empirical means", spec.arms(), mu_hat.len())?;
    Ok(())
}

/// A positive stopping decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stop {
    pub answer: AnswerId,
    /// `inf_{λ in ¬answer} sum_k N_k d(mu_hat_k, λ_k)`.
    pub statistic: f64,
    pub beta: f64,
}

/// The first answer (in `order`, by default declaration order) whose alternative is farther than
/// `β(t, δ)` from the empirical means in count-weighted divergence.
pub fn stopping_answer(
    spec: &ProblemSpec,
    family: &FamilyKind,
    counts: &[u64],
    mu_hat: &[f64],
    th: &Threshold,
    order: Option<&[AnswerId]>,
) -> Result<Option<Stop>> {
    check_counts(spec, counts, mu_hat)?;
    if counts.contains(&0) {
        return Err(Error::Invalid(
            "the stopping rule needs every arm sampled at least once".into(),
        ));
    }
    let t: u64 = counts.iter().sum();
    let beta = th.beta(t);
    let w: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    for a in ordered(spec, order) {
        let br = spec.best_response(family, a, &w, mu_hat)?;
        if br.value > beta {
            return Ok(Some(Stop {
                answer: a,
                statistic: br.value,
                beta,
            }));
        }
    }
    Ok(None)
}

fn region_candidate(
    spec: &ProblemSpec,
    family: &FamilyKind,
    c: &[f64],
    mu_hat: &[f64],
    radius: f64,
    answer: AnswerId,
) -> bool {
    spec.oracle_region(family, answer).within(c, mu_hat, radius) != Proximity::Outside
}

fn scaled_counts(family: &FamilyKind, counts: &[u64]) -> Vec<f64> {
    let s2 = family.quadratic_lower_variance();
    counts.iter().map(|&n| n as f64 / s2).collect()
}

/// A superset of the oracle answers of all means in the small confidence
/// region `{μ' : D(N, mu_hat, μ') <= ln f(t)}`, `t = sum N`, in declaration order.
pub fn candidate_oracle_answers(
    spec: &ProblemSpec,
    family: &FamilyKind,
    counts: &[u64],
    mu_hat: &[f64],
    th: &Threshold,
) -> Result<Vec<AnswerId>> {
    check_counts(spec, counts, mu_hat)?;
    if counts.contains(&0) {
        return Ok(spec.answers().collect());
    }
    let radius = th.log_f(counts.iter().sum());
    let c = scaled_counts(family, counts);
    let mut out: Vec<AnswerId> = spec
        .answers()
        .filter(|&a| region_candidate(spec, family, &c, mu_hat, radius, a))
        .collect();
    match solve_global(spec, family, mu_hat, &SolveOptions::default()) {
        Ok(g) => out.extend(g.oracle_answers),
        Err(Error::Degenerate(_)) => {}
        Err(e) => return Err(e),
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Invariant("empty candidate answer set".into()));
    }
    Ok(out)
}

/// The first element of [`candidate_oracle_answers`] in `order`, computed lazily.
pub fn first_candidate(
    spec: &ProblemSpec,
    family: &FamilyKind,
    counts: &[u64],
    mu_hat: &[f64],
    th: &Threshold,
    order: Option<&[AnswerId]>,
) -> Result<AnswerId> {
    check_counts(spec, counts, mu_hat)?;
    let order = ordered(spec, order);
    if counts.contains(&0) {
        return Ok(order[0]);
    }
    let radius = th.log_f(counts.iter().sum());
    let c = scaled_counts(family, counts);
    if let Some(&a) = order
        .iter()
        .find(|&&a| region_candidate(spec, family, &c, mu_hat, radius, a))
    {
        return Ok(a);
    }
    let g = solve_global(spec, family, mu_hat, &SolveOptions::default())?;
    Ok(*order
        .iter()
        .find(|a| g.oracle_answers.contains(a))
        .unwrap_or(&g.oracle_answers[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemKind;
    use approx::assert_abs_diff_eq;

    const STD: FamilyKind = FamilyKind::Gaussian { variance: 1.0 };

    fn spec(json: &str) -> ProblemSpec {
        ProblemSpec::new(serde_json::from_str::<ProblemKind>(json).unwrap()).unwrap()
    }

    #[test]
    fn beta_values() {
        let th = Threshold::with_constant(std::f64::consts::E, 1e-300).unwrap();
        assert_abs_diff_eq!(th.beta(1), 1.0, epsilon = 1e-12);
        let a = Threshold::with_constant(3.0, 2.0).unwrap();
        let b = Threshold::with_constant(3.0, 2.0 + 2f64.ln()).unwrap();
        assert_abs_diff_eq!(b.beta(17) - a.beta(17), 2f64.ln(), epsilon = 1e-12);
        // ln f(t) is β at δ = t^-5 plus another 3 ln t
        assert_abs_diff_eq!(a.log_f(10), 3f64.ln() + 10.0 * 10f64.ln(), epsilon = 1e-12);
        assert!(Threshold::with_constant(-1.0, 1.0).is_err());
        assert!(Threshold::with_constant(1.0, 0.0).is_err());
    }

    #[test]
    fn tail_matches_numeric_integral() {
        // ∫_S^∞ (e/K)^K ((c+2s)^2 s)^K e^{-s} ds by the trapezoid rule
        let (c, k, s0) = (5.0, 2usize, 6.0);
        let g = |s: f64| (std::f64::consts::E / 2.0f64).powi(2) * ((c + 2.0 * s).powi(2) * s).powi(2) * (-s).exp();
        let h = 1e-3;
        let mut num = 0.0;
        let mut s = s0;
        while s < 200.0 {
            num += 0.5 * h * (g(s) + g(s + h));
            s += h;
        }
        assert_abs_diff_eq!(integral_tail(c, k, s0) / num, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn certified_constant_passes_check() {
        for k in 1..=3 {
            let c = certified_constant(k);
            assert!(c >= threshold_series(c, k));
            assert!(c / 1.5 < threshold_series(c / 1.5, k) || c == std::f64::consts::E);
        }
        // direct partial sum below the bound for one arm
        let c = certified_constant(1);
        let partial: f64 = (2..200_000u64)
            .map(|t| {
                let t = t as f64;
                std::f64::consts::E * std::f64::consts::E * (c * t * t).ln().powi(2) * t.ln() / (t * t)
            })
            .sum();
        assert!(partial <= threshold_series(c, 1));
    }

    #[test]
    fn stopping_example() {
        let p = spec(r#"{"kind":"eps_minimum_threshold","arms":2,"threshold":0.0}"#);
        let mu = [1.0, 1.0];
        let counts = [10, 10];
        let w = [10.0, 10.0];
        let br = p.best_response(&STD, AnswerId(1), &w, &mu).unwrap();
        assert_abs_diff_eq!(br.value, 5.0, epsilon = 1e-12);
        // 1-d search over λ_k <= 0 for each coordinate
        let search = (0..=4000)
            .map(|i| -2.0 + i as f64 * 5e-4)
            .map(|l: f64| 10.0 * (1.0 - l.min(0.0)).powi(2) / 2.0)
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(search, 5.0, epsilon = 1e-9);
        let stops = Threshold::with_constant((4.0 - 2.0 * 20f64.ln() - 1e-9).exp(), 1.0).unwrap();
        let s = stopping_answer(&p, &STD, &counts, &mu, &stops, None).unwrap().unwrap();
        assert_eq!(s.answer, AnswerId(1));
        let waits = Threshold::with_constant((4.0 - 2.0 * 20f64.ln() + 1e-9).exp(), 1.0).unwrap();
        assert!(stopping_answer(&p, &STD, &counts, &mu, &waits, None).unwrap().is_none());
        assert!(stopping_answer(&p, &STD, &[0, 3], &mu, &waits, None).is_err());
    }

    #[test]
    fn candidates_any_low_arm_ellipsoid() {
        // arm 2 is a candidate iff some μ' with 50 (μ'-μ̂)² summed <= r has μ'_2 <= min(0, μ'_1)
        let p = spec(r#"{"kind":"any_low_arm","arms":2,"threshold":0.0}"#);
        let mu = [-1.0, -0.5];
        let counts = [100, 100];
        // smallest radius admitting μ'_1 = μ'_2: 2·50·0.25² = 6.25
        let grid_min = {
            let mut best = f64::INFINITY;
            for i in 0..=1000 {
                for j in 0..=1000 {
                    let x = -1.5 + i as f64 * 1e-3;
                    let y = -1.0 + j as f64 * 1e-3;
                    if y <= x.min(0.0) {
                        best = best.min(50.0 * ((x - mu[0]).powi(2) + (y - mu[1]).powi(2)));
                    }
                }
            }
            best
        };
        assert_abs_diff_eq!(grid_min, 6.25, epsilon = 1e-3);
        for (r, expect) in [(1.0, vec![AnswerId(1)]), (6.3, vec![AnswerId(1), AnswerId(2)])] {
            let th = Threshold::with_constant((r - 10.0 * 200f64.ln()).exp(), 1.0).unwrap();
            assert_abs_diff_eq!(th.log_f(200), r, epsilon = 1e-9);
            assert_eq!(candidate_oracle_answers(&p, &STD, &counts, &mu, &th).unwrap(), expect);
            assert_eq!(first_candidate(&p, &STD, &counts, &mu, &th, None).unwrap(), expect[0]);
        }
        let th = Threshold::with_constant((6.2 - 10.0 * 200f64.ln()).exp(), 1.0).unwrap();
        assert_eq!(
            candidate_oracle_answers(&p, &STD, &counts, &mu, &th).unwrap(),
            vec![AnswerId(1)]
        );
    }

    #[test]
    fn candidates_early_and_late() {
        let p = spec(r#"{"kind":"any_halfspace","normals":[[0.2,0.8],[0.8,0.2]]}"#);
        let th = Threshold::certified(2, 10.0).unwrap();
        let all = candidate_oracle_answers(&p, &STD, &[1, 1], &[0.1, -0.3], &th).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(
            candidate_oracle_answers(&p, &STD, &[0, 1], &[0.1, -0.3], &th)
                .unwrap()
                .len(),
            4
        );
        let tiny = Threshold::with_constant(1e-300, 10.0).unwrap();
        let got = candidate_oracle_answers(&p, &STD, &[10_000, 10_000], &[0.1, -0.3], &tiny).unwrap();
        assert_eq!(got, vec![AnswerId(0)]);
    }

    #[test]
    fn stopping_monotone_in_counts() {
        let p = spec(r#"{"kind":"any_low_arm","arms":3,"threshold":0.0}"#);
        let th = Threshold::with_constant(2.0, 3.0).unwrap();
        let mu = [-1.0, 0.2, 0.5];
        let mut prev = false;
        for n in 1..200u64 {
            let stop = stopping_answer(&p, &STD, &[n, n, n], &mu, &th, None).unwrap().is_some();
            assert!(!prev || stop);
            prev = stop;
        }
        assert!(prev);
    }
}
