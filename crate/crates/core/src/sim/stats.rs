//! Summary statistics for batches of runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Exact (Clopper–Pearson) two-sided confidence interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - level;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0).map_or(0.0, |b| b.inverse_cdf(alpha / 2.0))
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x).map_or(1.0, |b| b.inverse_cdf(1.0 - alpha / 2.0))
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges; bin `i` is `[edges[i], edges[i + 1])`, the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn with_edges(data: &[f64], edges: Vec<f64>) -> Self {
        let nb = edges.len().saturating_sub(1);
        let mut counts = vec![0u64; nb];
        if nb > 0 {
            let (lo, hi) = (edges[0], edges[nb]);
            let width = (hi - lo) / nb as f64;
            for &x in data {
                let i = if width > 0.0 {
                    (((x - lo) / width).floor().max(0.0) as usize).min(nb - 1)
                } else {
                    0
                };
                counts[i] += 1;
            }
        }
        Histogram { edges, counts }
    }

    /// `bins` equal-width bins on `[lo, hi]`.
    pub fn uniform(data: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Histogram::with_edges(data, edges)
    }

    /// Freedman–Diaconis bin width `2 IQR n^{-1/3}`, at most `max_bins` bins.
    pub fn freedman_diaconis(data: &[f64], max_bins: usize) -> Self {
        if data.is_empty() {
            return Histogram {
                edges: vec![],
                counts: vec![],
            };
        }
        let mut v = data.to_vec();
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (v[0], v[v.len() - 1]);
        let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
        let width = 2.0 * iqr / (v.len() as f64).cbrt();
        let bins = if hi > lo && width > 0.0 {
            (((hi - lo) / width).ceil() as usize).clamp(1, max_bins)
        } else {
            1
        };
        let hi = if hi > lo { hi } else { lo + 1.0 };
        Histogram::uniform(&v, lo, hi, bins)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Paired comparison of `a - b`: mean difference, z statistic and the
/// one-sided p-value for `mean(a - b) > 0` under the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTest {
    pub pairs: usize,
    pub mean_diff: f64,
    pub z: f64,
    pub p_greater: f64,
}

pub fn paired_test(a: &[f64], b: &[f64]) -> PairedTest {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    let se = std_dev(&d) / (d.len() as f64).sqrt();
    let z = m / se;
    let p = Normal::new(0.0, 1.0).map_or(f64::NAN, |n| 1.0 - n.cdf(z));
    PairedTest {
        pairs: d.len(),
        mean_diff: m,
        z,
        p_greater: p,
    }
}
