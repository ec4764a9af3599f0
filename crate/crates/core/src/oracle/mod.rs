//! Oracle quantities: `D(mu, ¬i)`, oracle weights, oracle answers and the
//! characteristic time `T*(mu) = 1 / max_i D(mu, ¬i)`.

mod closed_form;
mod cutting_plane;
mod equilibrium;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::FamilyKind;
use crate::problems::{AnswerId, ProblemSpec};

pub use equilibrium::{equilibrium, Equilibrium};

/// Relative window within which answers count as tied for the maximum.
pub const TIE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Closed form when one applies, cutting planes otherwise.
    #[default]
    Auto,
    ClosedForm,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    /// Absolute tolerance on the value; defaults depend on the method.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Auto,
            tol: None,
            max_iter: 5000,
            warm_start: None,
        }
    }
}

impl SolveOptions {
    pub fn iterative(tol: f64) -> Self {
        SolveOptions {
            method: Method::Iterative,
            tol: Some(tol),
            ..Default::default()
        }
    }
}

pub const DEFAULT_CLOSED_TOL: f64 = 1e-6;
pub const DEFAULT_ITERATIVE_TOL: f64 = 1e-4;

/// `D(mu, ¬answer)` with representatives of the maximising weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub value: f64,
    /// Representatives of the maximiser set; never empty.
    pub weights: Vec<Vec<f64>>,
    pub method: Method,
    /// Upper bound minus value at termination (0 for closed forms).
    pub gap: f64,
    pub iterations: usize,
}

impl OracleSolution {
    pub fn representative(&self) -> &[f64] {
        &self.weights[0]
    }
}

pub fn solve_answer(
    spec: &ProblemSpec,
    family: &FamilyKind,
    mu: &[f64],
    answer: AnswerId,
    opts: &SolveOptions,
) -> Result<OracleSolution> {
    spec.check_answer(answer)?;
    spec.check_mu(family, mu)?;
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
        }
    }
    if opts.method != Method::Iterative {
        if let Some((value, weights)) = closed_form::closed_form(spec, family, mu, answer)? {
            return Ok(OracleSolution {
                value,
                weights,
                method: Method::ClosedForm,
                gap: 0.0,
                iterations: 0,
            });
        }
        if opts.method == Method::ClosedForm {
            return Err(Error::NotImplemented(format!(
                "closed form for answer {} of this problem",
                spec.label(answer)
            )));
        }
    }
    let tol = opts.tol.unwrap_or(DEFAULT_ITERATIVE_TOL);
    let out = cutting_plane::maximise(
        family,
        spec.alternative(answer),
        mu,
        tol,
        opts.max_iter,
        opts.warm_start.as_deref(),
    )?;
    Ok(OracleSolution {
        value: out.value,
        weights: vec![out.weights],
        method: Method::Iterative,
        gap: out.gap,
        iterations: out.iterations,
    })
}

/// Oracle quantities over all answers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalOracle {
    /// `D(mu) = max_i D(mu, ¬i)`.
    pub value: f64,
    pub t_star: f64,
    /// `i_F(mu)` in declaration order.
    pub oracle_answers: Vec<AnswerId>,
    pub per_answer: Vec<OracleSolution>,
}

impl GlobalOracle {
    /// Oracle weights: the representatives of every oracle answer.
    pub fn oracle_weights(&self) -> Vec<&[f64]> {
        self.oracle_answers
            .iter()
            .flat_map(|a| self.per_answer[a.0].weights.iter().map(Vec::as_slice))
            .collect()
    }

    /// First representative of the first oracle answer.
    pub fn first_weights(&self) -> &[f64] {
        self.per_answer[self.oracle_answers[0].0].representative()
    }
}

pub fn solve_global(spec: &ProblemSpec, family: &FamilyKind, mu: &[f64], opts: &SolveOptions) -> Result<GlobalOracle> {
    let per_answer = spec
        .answers()
        .map(|a| solve_answer(spec, family, mu, a, opts))
        .collect::<Result<Vec<_>>>()?;
    let value = per_answer.iter().map(|s| s.value).fold(0.0, f64::max);
    if value == 0.0 {
        return Err(Error::Degenerate(format!("every answer has zero divergence at {mu:?}")));
    }
    let oracle_answers = spec
        .answers()
        .filter(|a| {
            let v = per_answer[a.0].value;
            if value.is_infinite() {
                v.is_infinite()
            } else {
                v >= value * (1.0 - TIE_TOLERANCE)
            }
        })
        .collect();
    Ok(GlobalOracle {
        value,
        t_star: 1.0 / value,
        oracle_answers,
        per_answer,
    })
}
