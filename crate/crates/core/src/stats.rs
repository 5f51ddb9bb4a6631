//! Bootstrap statistics: percentile confidence intervals for means and
//! paired-resample comparison probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const DEFAULT_N_BOOT: usize = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of a sorted slice, q in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn resample_mean(values: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    for _ in 0..n {
        total += values[rng.random_range(0..n)];
    }
    total / n as f64
}

/// Percentile bootstrap CI for the mean: resample with replacement `n_boot`
/// times and take the outer quantiles of the resampled means.
pub fn bootstrap_ci(values: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..n_boot.max(1))
        .map(|_| resample_mean(values, &mut rng))
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    Ok((
        quantile_sorted(&means, alpha),
        quantile_sorted(&means, 1.0 - alpha),
    ))
}

/// Result of a paired bootstrap comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapComparison {
    /// Fraction of resamples with mean(a*) strictly greater than mean(b*).
    pub p_greater: f64,
    /// Fraction of exactly tied resample means, reported separately.
    pub tie_fraction: f64,
}

/// P that condition `a` beats condition `b`: the fraction of independent
/// bootstrap resamples where mean(a*) > mean(b*) strictly.
pub fn compare_bootstrap_p(
    a: &[f64],
    b: &[f64],
    n_boot: usize,
    seed: u64,
) -> Result<BootstrapComparison> {
    if a.is_empty() {
        return Err(Error::EmptyInput("a"));
    }
    if b.is_empty() {
        return Err(Error::EmptyInput("b"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut greater = 0usize;
    let mut ties = 0usize;
    let n_boot = n_boot.max(1);
    for _ in 0..n_boot {
        let ma = resample_mean(a, &mut rng);
        let mb = resample_mean(b, &mut rng);
        if ma > mb {
            greater += 1;
        } else if ma == mb {
            ties += 1;
        }
    }
    Ok(BootstrapComparison {
        p_greater: greater as f64 / n_boot as f64,
        tie_fraction: ties as f64 / n_boot as f64,
    })
}
