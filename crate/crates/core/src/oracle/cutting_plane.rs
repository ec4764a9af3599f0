//! Kelley's cutting-plane method for `max_{w in simplex} D(w, mu, ¬i)`.
//!
//! `w -> D(w, mu, ¬i)` is the infimum of the linear functions
//! `w -> sum_k w_k d(mu_k, λ_k)` over `λ in ¬i`. Every best response adds one
//! of them as a cut to a linear master problem whose optimum is an upper bound
//! on the value; the best evaluated point is a lower bound.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};
use crate::expfam::FamilyKind;
use crate::problems::{union_best_response, Primitive};

pub(crate) struct Outcome {
    pub value: f64,
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    /// Best responses collected along the way (the cuts).
    pub responses: Vec<Vec<f64>>,
}

fn gains(family: &FamilyKind, mu: &[f64], lambda: &[f64]) -> Vec<f64> {
    mu.iter().zip(lambda).map(|(&m, &l)| family.divergence(m, l)).collect()
}

fn lp_error(e: microlp::Error) -> Error {
    Error::Invariant(format!("linear master problem failed: {e}"))
}

struct Master {
    solution: Solution,
    w: Vec<Variable>,
    z: Variable,
}

impl Master {
    fn new(k: usize, first_cut: &[f64]) -> Result<Self> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let w: Vec<Variable> = (0..k).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let cap = first_cut.iter().copied().fold(0.0, f64::max);
        let z = lp.add_var(1.0, (0.0, cap.max(1e-300)));
        let ones: Vec<(Variable, f64)> = w.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
        lp.add_constraint(Self::cut_expr(&w, z, first_cut).as_slice(), ComparisonOp::Le, 0.0);
        let solution = lp.solve().map_err(lp_error)?;
        Ok(Master { solution, w, z })
    }

    fn cut_expr(w: &[Variable], z: Variable, g: &[f64]) -> Vec<(Variable, f64)> {
        let mut e: Vec<(Variable, f64)> = w
            .iter()
            .zip(g)
            .filter(|(_, &gk)| gk != 0.0)
            .map(|(&v, &gk)| (v, -gk))
            .collect();
        e.push((z, 1.0));
        e
    }

    fn add_cut(self, g: &[f64]) -> Result<Self> {
        let expr = Self::cut_expr(&self.w, self.z, g);
        let solution = self
            .solution
            .add_constraint(expr.as_slice(), ComparisonOp::Le, 0.0)
            .map_err(lp_error)?;
        Ok(Master { solution, ..self })
    }

    fn point(&self) -> (Vec<f64>, f64) {
        let mut w: Vec<f64> = self.w.iter().map(|&v| self.solution[v].max(0.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        (w, self.solution.objective())
    }
}

pub(crate) fn maximise(
    family: &FamilyKind,
    prims: &[Primitive],
    mu: &[f64],
    tol: f64,
    max_iter: usize,
    warm_start: Option<&[f64]>,
) -> Result<Outcome> {
    let k = mu.len();
    let uniform = vec![1.0 / k as f64; k];
    let first = union_best_response(family, prims, &uniform, mu)?;
    if first.value == 0.0 || first.value.is_infinite() {
        // Either μ is in the closed alternative (every w scores 0) or the
        // alternative is empty (every w scores ∞).
        return Ok(Outcome {
            value: first.value,
            weights: warm_start.map_or(uniform.clone(), <[f64]>::to_vec),
            lambda: first.lambda,
            gap: 0.0,
            iterations: 0,
            responses: Vec::new(),
        });
    }
    let mut best = (first.value, uniform.clone(), first.lambda.clone());
    let mut responses = vec![first.lambda.clone()];
    let mut master = Master::new(k, &gains(family, mu, &first.lambda))?;
    let mut starts: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            e
        })
        .collect();
    if let Some(w) = warm_start {
        starts.push(w.to_vec());
    }
    for w in &starts {
        let br = union_best_response(family, prims, w, mu)?;
        if br.value > best.0 {
            best = (br.value, w.clone(), br.lambda.clone());
        }
        master = master.add_cut(&gains(family, mu, &br.lambda))?;
        responses.push(br.lambda);
    }
    let mut gap = f64::INFINITY;
    for iteration in 0..max_iter {
        let (w, upper) = master.point();
        let br = union_best_response(family, prims, &w, mu)?;
        if br.value > best.0 {
            best = (br.value, w.clone(), br.lambda.clone());
        }
        gap = upper - best.0;
        if gap <= tol {
            return Ok(Outcome {
                value: best.0,
                weights: best.1,
                lambda: best.2,
                gap: gap.max(0.0),
                iterations: iteration + 1,
                responses,
            });
        }
        master = master.add_cut(&gains(family, mu, &br.lambda))?;
        responses.push(br.lambda);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        gap,
        value: best.0,
        best_weights: best.1,
    })
}
