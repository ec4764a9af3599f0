//! One-parameter exponential families in mean parameterisation.
//!
//! Everything downstream is expressed through the divergence `d(mu, lambda)`
//! between two members of the family and a handful of derived quantities
//! (its derivative in `lambda`, the inverse of that derivative, and a
//! quadratic lower bound used for conservative region tests).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Distance kept between empirical Bernoulli means and `{0, 1}`.
pub const BERNOULLI_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilyKind {
    Gaussian { variance: f64 },
    Bernoulli,
}

impl Default for FamilyKind {
    fn default() -> Self {
        FamilyKind::Gaussian { variance: 1.0 }
    }
}

impl FamilyKind {
    pub fn gaussian(variance: f64) -> Self {
        FamilyKind::Gaussian { variance }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Gaussian { .. } => "gaussian",
            FamilyKind::Bernoulli => "bernoulli",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FamilyKind::Gaussian { variance } if !(variance > 0.0 && variance.is_finite()) => Err(Error::Invalid(
                format!("gaussian variance must be positive, got {variance}"),
            )),
            _ => Ok(()),
        }
    }

    /// Variance when the family is a known-variance Gaussian.
    pub fn gaussian_variance(&self) -> Option<f64> {
        match *self {
            FamilyKind::Gaussian { variance } => Some(variance),
            FamilyKind::Bernoulli => None,
        }
    }

    pub fn in_domain(&self, mean: f64) -> bool {
        match self {
            FamilyKind::Gaussian { .. } => mean.is_finite(),
            FamilyKind::Bernoulli => mean > 0.0 && mean < 1.0,
        }
    }

    pub fn check_mean(&self, mean: f64) -> Result<()> {
        if self.in_domain(mean) {
            Ok(())
        } else {
            Err(Error::Domain {
                family: self.name(),
                value: mean,
            })
        }
    }

    pub fn check_means(&self, means: &[f64]) -> Result<()> {
        means.iter().try_for_each(|&m| self.check_mean(m))
    }

    /// Pulls an empirical mean back into the open mean domain.
    pub fn clamp_mean(&self, mean: f64) -> f64 {
        match self {
            FamilyKind::Gaussian { .. } => mean,
            FamilyKind::Bernoulli => mean.clamp(BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP),
        }
    }

    /// KL divergence `d(mu, lambda)`, checking both arguments.
    pub fn kl(&self, mu: f64, lambda: f64) -> Result<f64> {
        self.check_mean(mu)?;
        self.check_mean(lambda)?;
        Ok(self.divergence(mu, lambda))
    }

    /// KL divergence without domain checks. Callers guarantee the domain.
    #[inline]
    pub fn divergence(&self, mu: f64, lambda: f64) -> f64 {
        match *self {
            FamilyKind::Gaussian { variance } => (mu - lambda) * (mu - lambda) / (2.0 * variance),
            FamilyKind::Bernoulli => {
                if mu == lambda {
                    return 0.0;
                }
                let a = if mu > 0.0 { mu * (mu / lambda).ln() } else { 0.0 };
                let b = if mu < 1.0 {
                    (1.0 - mu) * ((1.0 - mu) / (1.0 - lambda)).ln()
                } else {
                    0.0
                };
                (a + b).max(0.0)
            }
        }
    }

    /// `d/dlambda d(mu, lambda) = (lambda - mu) / V(lambda)`.
    #[inline]
    pub fn divergence_slope(&self, mu: f64, lambda: f64) -> f64 {
        match *self {
            FamilyKind::Gaussian { variance } => (lambda - mu) / variance,
            FamilyKind::Bernoulli => (lambda - mu) / (lambda * (1.0 - lambda)),
        }
    }

    /// The unique `lambda` with `divergence_slope(mu, lambda) == slope`.
    pub fn lambda_for_slope(&self, mu: f64, slope: f64) -> f64 {
        match *self {
            FamilyKind::Gaussian { variance } => mu + variance * slope,
            FamilyKind::Bernoulli => {
                // slope * l^2 + (1 - slope) * l - mu = 0, root in (0, 1)
                if slope == 0.0 {
                    return mu;
                }
                let b = 1.0 - slope;
                let s = (b * b + 4.0 * slope * mu).sqrt();
                let l = if b >= 0.0 {
                    2.0 * mu / (b + s)
                } else {
                    (-b + s) / (2.0 * slope)
                };
                l.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
        }
    }

    /// A variance `s2` with `d(mu, lambda) >= (mu - lambda)^2 / (2 s2)` on the whole
    /// domain: exact for Gaussians, Pinsker's inequality for Bernoulli.
    pub fn quadratic_lower_variance(&self) -> f64 {
        match *self {
            FamilyKind::Gaussian { variance } => variance,
            FamilyKind::Bernoulli => 0.25,
        }
    }

    /// `sum_k w_k d(mu_k, lambda_k)` with domain and length checks.
    pub fn weighted_divergence(&self, w: &[f64], mu: &[f64], lambda: &[f64]) -> Result<f64> {
        check_len("weights", mu.len(), w.len())?;
        check_len("alternative", mu.len(), lambda.len())?;
        self.check_means(mu)?;
        self.check_means(lambda)?;
        if let Some(&bad) = w.iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::Invalid(format!("negative weight {bad}")));
        }
        Ok(self.weighted_divergence_unchecked(w, mu, lambda))
    }

    #[inline]
    pub fn weighted_divergence_unchecked(&self, w: &[f64], mu: &[f64], lambda: &[f64]) -> f64 {
        w.iter()
            .zip(mu.iter().zip(lambda))
            .filter(|(&wk, _)| wk > 0.0)
            .map(|(&wk, (&m, &l))| wk * self.divergence(m, l))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match *self {
            FamilyKind::Gaussian { variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
            FamilyKind::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}
