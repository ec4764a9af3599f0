//! Mixed equilibria of the game between the weights and the alternative.
//!
//! `D(mu, ¬i) = min_q max_k E_{λ ~ q} d(mu_k, λ_k)` over distributions `q` on
//! `¬i`, attained with at most `K` support points. The game is restricted to a
//! finite set of candidate alternatives (best responses at simplex grid points
//! and the cuts of the cutting-plane solver) and solved as a linear program.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::Serialize;

use super::cutting_plane;
use crate::error::{Error, Result};
use crate::expfam::FamilyKind;
use crate::problems::{union_best_response, AnswerId, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub q: Vec<f64>,
    pub supports: Vec<Vec<f64>>,
    /// `max_k sum_j q_j d(mu_k, λ^j_k)`.
    pub value: f64,
    /// Optimal weights of the maximising player.
    pub weights: Vec<f64>,
    /// `value` minus the best-response value at `weights`.
    pub gap: f64,
}

fn simplex_grid(k: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == k - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / n as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k, left - c, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, n, n, &mut Vec::new(), &mut out);
    out
}

/// Equilibrium of the game for `answer`; `grid` is the resolution of the
/// simplex grid used to seed candidate alternatives.
pub fn equilibrium(
    spec: &ProblemSpec,
    family: &FamilyKind,
    mu: &[f64],
    answer: AnswerId,
    grid: usize,
    tol: f64,
) -> Result<Equilibrium> {
    spec.check_answer(answer)?;
    spec.check_mu(family, mu)?;
    if !(tol > 0.0) || grid == 0 {
        return Err(Error::Invalid("equilibrium needs tol > 0 and grid >= 1".into()));
    }
    let k = spec.arms();
    let prims = spec.alternative(answer);
    let solved = cutting_plane::maximise(family, prims, mu, tol / 4.0, 20_000, None)?;
    if solved.value.is_infinite() {
        return Err(Error::Degenerate("the alternative set is empty".into()));
    }
    if solved.value == 0.0 {
        return Ok(Equilibrium {
            q: vec![1.0],
            supports: vec![mu.to_vec()],
            value: 0.0,
            weights: solved.weights,
            gap: 0.0,
        });
    }
    let mut candidates = solved.responses;
    for w in simplex_grid(k, grid) {
        candidates.push(union_best_response(family, prims, &w, mu)?.lambda);
    }
    candidates.push(solved.lambda);
    let gains: Vec<Vec<f64>> = candidates
        .iter()
        .map(|l| mu.iter().zip(l).map(|(&m, &x)| family.divergence(m, x)).collect())
        .collect();
    let cap = gains.iter().flatten().copied().fold(0.0, f64::max);

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let q: Vec<Variable> = candidates.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let v = lp.add_var(1.0, (0.0, cap));
    let ones: Vec<(Variable, f64)> = q.iter().map(|&x| (x, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    for arm in 0..k {
        let mut row: Vec<(Variable, f64)> = q
            .iter()
            .zip(&gains)
            .filter(|(_, g)| g[arm] != 0.0)
            .map(|(&x, g)| (x, g[arm]))
            .collect();
        row.push((v, -1.0));
        lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Invariant(format!("equilibrium linear program failed: {e}")))?;

    let mut pairs: Vec<(f64, usize)> = q
        .iter()
        .enumerate()
        .map(|(j, &x)| (sol[x], j))
        .filter(|(x, _)| *x > 1e-12)
        .collect();
    let total: f64 = pairs.iter().map(|p| p.0).sum();
    pairs.iter_mut().for_each(|p| p.0 /= total);
    let value = (0..k)
        .map(|arm| pairs.iter().map(|&(x, j)| x * gains[j][arm]).sum::<f64>())
        .fold(0.0, f64::max);
    let gap = value - solved.value;
    if gap > tol {
        return Err(Error::NonConvergence {
            iterations: candidates.len(),
            gap,
            value: solved.value,
            best_weights: solved.weights,
        });
    }
    Ok(Equilibrium {
        q: pairs.iter().map(|p| p.0).collect(),
        supports: pairs.iter().map(|&(_, j)| candidates[j].clone()).collect(),
        value,
        weights: solved.weights,
        gap,
    })
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
    fn grid_size() {
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert!(simplex_grid(2, 2).contains(&vec![0.5, 0.5]));
    }

    #[test]
    fn two_arm_best_arm_is_pure() {
        let p = spec(r#"{"kind":"eps_best_arm","arms":2}"#);
        let e = equilibrium(&p, &STD, &[1.0, 0.0], AnswerId(0), 4, 1e-6).unwrap();
        assert_eq!(e.q.len(), 1);
        assert_abs_diff_eq!(e.supports[0][0], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(e.supports[0][1], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(e.value, 0.125, epsilon = 1e-6);
    }

    #[test]
    fn min_threshold_two_point_mixture() {
        // Payoffs: λ¹ = (0, 2) -> (0.5, 0), λ² = (1, 0) -> (0, 2).
        // Equalising 0.5 q = 2 (1 - q) gives q = 0.8 and value 0.4.
        let p = spec(r#"{"kind":"eps_minimum_threshold","arms":2,"threshold":0.0}"#);
        let e = equilibrium(&p, &STD, &[1.0, 2.0], AnswerId(1), 4, 1e-6).unwrap();
        assert_abs_diff_eq!(e.value, 0.4, epsilon = 1e-6);
        assert_eq!(e.q.len(), 2);
        let first = e.supports.iter().position(|s| s[0].abs() < 1e-9).unwrap();
        assert_abs_diff_eq!(e.q[first], 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(e.supports[first][1], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_value_game() {
        let p = spec(r#"{"kind":"any_sign","arms":1,"threshold":0.0}"#);
        let e = equilibrium(&p, &STD, &[1.0], AnswerId(0), 4, 1e-6).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.q, vec![1.0]);
        assert_eq!(e.supports, vec![vec![1.0]]);
    }
}
