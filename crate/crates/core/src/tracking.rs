//! Sampling rules that steer empirical pull proportions towards target weights.
//!
//! C-tracking follows the running sum of clipped targets and converges to the
//! convex hull of what it tracks; D-tracking follows the current target
//! directly, with forced exploration of under-sampled arms.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TrackingMode {
    #[default]
    C,
    D,
}

/// Tolerance used when validating that a weight vector lies on the simplex.
const SIMPLEX_TOL: f64 = 1e-6;

pub fn check_simplex(w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !(x.is_finite() && *x >= -SIMPLEX_TOL)) {
        return Err(Error::Invalid(format!(
            "weights must be finite and non-negative: {w:?}"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Invalid(format!("weights must sum to 1, got {s}")));
    }
    Ok(())
}

/// Projection of `w` onto `{v : v_k >= eps, sum v = 1}` by water-filling:
/// `v_k = max(w_k - τ, eps)` with the level `τ` chosen so that `v` sums to one.
pub fn clip_project(w: &[f64], eps: f64) -> Result<Vec<f64>> {
    let k = w.len();
    if k == 0 {
        return Err(Error::Invalid("empty weight vector".into()));
    }
    if !(eps >= 0.0 && eps <= 1.0 / k as f64 * (1.0 + 1e-12)) {
        return Err(Error::Invalid(format!("clip level {eps} must lie in [0, 1/{k}]")));
    }
    check_simplex(w)?;
    if w.iter().all(|&x| x >= eps) {
        return Ok(w.to_vec());
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut top = 0.0;
    let mut level = 0.0;
    for m in 1..=k {
        top += sorted[m - 1];
        let tau = (top - (1.0 - (k - m) as f64 * eps)) / m as f64;
        let next_inactive = m == k || sorted[m] - tau <= eps;
        if sorted[m - 1] - tau > eps && next_inactive {
            level = tau;
            break;
        }
        if m == k {
            level = tau;
        }
    }
    Ok(w.iter().map(|&x| (x - level).max(eps)).collect())
}

/// `ε_t = (K² + t)^{-1/2} / 2`.
pub fn clip_level(k: usize, t: u64) -> f64 {
    0.5 / ((k * k) as f64 + t as f64).sqrt()
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Pull counts and cumulative clipped targets of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    mode: TrackingMode,
    counts: Vec<u64>,
    cum_w: Vec<f64>,
    t: u64,
}

impl Tracker {
    pub fn new(k: usize, mode: TrackingMode) -> Self {
        Tracker {
            mode,
            counts: vec![0; k],
            cum_w: vec![0.0; k],
            t: 0,
        }
    }

    /// Starts from existing counts, treating past pulls as tracked targets.
    pub fn with_counts(counts: &[u64], mode: TrackingMode) -> Self {
        Tracker {
            mode,
            counts: counts.to_vec(),
            cum_w: counts.iter().map(|&n| n as f64).collect(),
            t: counts.iter().sum(),
        }
    }

    pub fn mode(&self) -> TrackingMode {
        self.mode
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn cum_w(&self) -> &[f64] {
        &self.cum_w
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Chooses the next arm for target `w` and records the pull.
    pub fn next_arm(&mut self, w: &[f64]) -> Result<usize> {
        check_len("target weights", self.counts.len(), w.len())?;
        let arm = match self.mode {
            TrackingMode::C => self.choose_c(w)?,
            TrackingMode::D => {
                check_simplex(w)?;
                self.choose_d(w)
            }
        };
        self.counts[arm] += 1;
        self.t += 1;
        Ok(arm)
    }

    fn choose_c(&mut self, w: &[f64]) -> Result<usize> {
        let k = self.counts.len();
        let proj = clip_project(w, clip_level(k, self.t))?;
        for (c, p) in self.cum_w.iter_mut().zip(&proj) {
            *c += p;
        }
        Ok(argmin(self.counts.iter().zip(&self.cum_w).map(|(&n, &c)| n as f64 - c)))
    }

    fn choose_d(&self, w: &[f64]) -> usize {
        let k = self.counts.len() as f64;
        let t = self.t as f64;
        let floor = t.sqrt() - k / 2.0;
        if let Some(j) = self.counts.iter().position(|&n| (n as f64) <= floor) {
            return j;
        }
        argmin(self.counts.iter().zip(w).map(|(&n, &wk)| n as f64 - t * wk))
    }
}
