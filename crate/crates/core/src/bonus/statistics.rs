//! Visitation statistics of the distilled target distribution.
//!
//! `z` is the squared distance of the running mean of `n` target draws from
//! the target mean, scaled by `d * sigma^2`; its expectation is exactly `1/n`
//! and its variance `2/(d n^2)`. `y` is the population-denominator analogue
//! of the moment-ratio statistic, whose variance carries an extra
//! `4 mu^2 / (n sigma^2)` term.

use thiserror::Error;

use crate::scalar::{Exact, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("visit count must be positive")]
    ZeroCount,
    #[error("statistic needs at least one dimension")]
    EmptyVector,
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma > T::zero() && sigma.is_finite() {
        Ok(())
    } else {
        Err(StatsError::NonPositiveSigma(sigma.as_f64()))
    }
}

/// `||m - mu 1_d||^2 / (d sigma^2)` for a `d`-dimensional running mean `m`.
pub fn z_statistic<T: Scalar>(sample_mean: &[T], mu: T, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    if sample_mean.is_empty() {
        return Err(StatsError::EmptyVector);
    }
    let d = T::of(sample_mean.len() as f64);
    let sq = sample_mean
        .iter()
        .fold(T::zero(), |acc, &m| acc + (m - mu) * (m - mu));
    Ok(sq / (d * sigma * sigma))
}

/// `(m^2 - mu^2) / sigma^2`; unbiased for `1/n` but may be negative.
pub fn y_statistic_population<T: Scalar>(sample_mean: T, mu: T, sigma: T) -> Result<T> {
    check_sigma(sigma)?;
    Ok((sample_mean * sample_mean - mu * mu) / (sigma * sigma))
}

/// Coordinate-averaged [`y_statistic_population`] for a `d`-vector mean.
pub fn y_statistic_population_vec<T: Scalar>(sample_mean: &[T], mu: T, sigma: T) -> Result<T> {
    if sample_mean.is_empty() {
        return Err(StatsError::EmptyVector);
    }
    let mut acc = T::zero();
    for &m in sample_mean {
        acc += y_statistic_population(m, mu, sigma)?;
    }
    Ok(acc / T::of(sample_mean.len() as f64))
}

fn count<T: Exact>(n: u64) -> Result<T> {
    if n == 0 {
        return Err(StatsError::ZeroCount);
    }
    Ok(T::from_u64(n).expect("count representable"))
}

/// Exact variance of `z` for `n` visits in one dimension: `2 / n^2`.
pub fn closed_form_var_z<T: Exact>(n: u64) -> Result<T> {
    let n = count::<T>(n)?;
    let two = T::one() + T::one();
    Ok(two / (n.clone() * n))
}

/// Exact variance of the population `y`: `2/n^2 + 4 mu^2 / (n sigma^2)`.
pub fn closed_form_var_y<T: Exact>(n: u64, mu: T, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(StatsError::NonPositiveSigma(f64::NAN));
    }
    let var_z = closed_form_var_z::<T>(n)?;
    let n = count::<T>(n)?;
    let four = T::from_u8(4).expect("small integer");
    Ok(var_z + four * mu.clone() * mu / (n * sigma.clone() * sigma))
}

/// Raw moments `E[X^2]`, `E[X^3]`, `E[X^4]` of `N(mu, sigma^2)`.
pub fn moments_b234<T: Exact>(mu: T, sigma: T) -> (T, T, T) {
    let s2 = sigma.clone() * sigma;
    let mu2 = mu.clone() * mu.clone();
    let three = T::from_u8(3).expect("small integer");
    let six = T::from_u8(6).expect("small integer");
    let b2 = mu2.clone() + s2.clone();
    let b3 = mu2.clone() * mu.clone() + three.clone() * mu * s2.clone();
    let b4 = mu2.clone() * mu2.clone() + six * mu2 * s2.clone() + three * s2.clone() * s2;
    (b2, b3, b4)
}

/// Deviation radius `eps(n, delta)` with `P(|z_n - 1/n| >= eps) <= 2 delta`:
/// a Chebyshev term for the diagonal chi-square part plus a Chernoff term
/// for the cross products.
pub fn concentration_epsilon<T: Scalar>(n: u64, delta: T) -> Result<T> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(StatsError::DeltaOutOfRange(delta.as_f64()));
    }
    if n == 0 {
        return Err(StatsError::ZeroCount);
    }
    let nf = T::of(n as f64);
    let two = T::of(2.0);
    let log_term = (two / delta).ln();
    let pairs = nf * (nf - T::one()) / two;
    let chebyshev = (two / (delta * nf * nf * nf)).sqrt();
    let chernoff = (log_term * (pairs + log_term)).sqrt() / (nf * nf);
    Ok(chebyshev + chernoff)
}
