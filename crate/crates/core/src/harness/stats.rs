//! Estimators used by the experiment summaries: Wilson score intervals,
//! empirical factorial moments, and total-variation distance against a
//! Poisson reference.

use crate::error::{Error, Result};
use crate::theory::{falling_factorial, poisson_pmf};

/// z for the fixed 99% confidence level of all summary intervals.
pub const WILSON_Z: f64 = 2.575_829_303_548_900_4;

/// Number of individually compared counts in the total-variation
/// distance; everything above is lumped into one tail bin. Poisson mass
/// beyond 20 is negligible for the rates the window produces (|t| <= 3).
pub const TV_TAIL_CUTOFF: u64 = 20;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::domain("Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::domain("successes exceed trials"));
    }
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * libm::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)) / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Empirical probability masses of the observed counts on
/// `0 ..= TV_TAIL_CUTOFF`, plus the lumped tail mass.
pub fn empirical_count_pmf(counts: &[u64]) -> Result<(Vec<f64>, f64)> {
    if counts.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let mut bins = vec![0u64; TV_TAIL_CUTOFF as usize + 1];
    let mut tail = 0u64;
    for &y in counts {
        if y <= TV_TAIL_CUTOFF {
            bins[y as usize] += 1;
        } else {
            tail += 1;
        }
    }
    let total = counts.len() as f64;
    Ok((
        bins.iter().map(|&c| c as f64 / total).collect(),
        tail as f64 / total,
    ))
}

/// Total-variation distance between the empirical distribution of the
/// observed counts and Poisson(mu): half the l1 distance over the bins
/// `0 ..= TV_TAIL_CUTOFF`, with everything above lumped into one bin.
pub fn tv_distance_to_poisson(counts: &[u64], mu: f64) -> Result<f64> {
    let (pmf, emp_tail) = empirical_count_pmf(counts)?;
    let mut l1 = 0.0;
    let mut poisson_head = 0.0;
    for (k, &p_emp) in pmf.iter().enumerate() {
        let p_ref = poisson_pmf(k as u64, mu);
        poisson_head += p_ref;
        l1 += (p_emp - p_ref).abs();
    }
    let poisson_tail = (1.0 - poisson_head).max(0.0);
    l1 += (emp_tail - poisson_tail).abs();
    Ok(l1 / 2.0)
}

/// Mean of the r-th falling factorial over the observed counts,
/// the plug-in estimator of `E[(Y)_r]`.
pub fn empirical_factorial_moment(counts: &[u64], r: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::domain("moment order r must be >= 1"));
    }
    if counts.is_empty() {
        return Err(Error::domain("empty sample"));
    }
    let sum: f64 = counts.iter().map(|&y| falling_factorial(y, r)).sum();
    Ok(sum / counts.len() as f64)
}
