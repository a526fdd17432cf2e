//! Monte Carlo oracle: streaming mean, variance and standard error.
//!
//! Trials are split into fixed-size chunks, each with its own random stream,
//! and the per-chunk accumulators are merged in chunk order. Results are
//! therefore identical for any number of workers.

use rayon::prelude::*;
use rdd_core::Rng;

use crate::error::Result;
use crate::pool::pool;

const CHUNK: u64 = 4096;

/// Welford accumulator with Chan's pairwise merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> McEstimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            var,
            se: (var / self.n.max(1) as f64).sqrt(),
            trials: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub trials: u64,
}

/// Mean, variance and standard error of `statistic(sampler(rng))` over `trials` draws.
pub fn mc_oracle<S>(
    sampler: impl Fn(&mut Rng) -> S + Sync,
    statistic: impl Fn(&S) -> f64 + Sync,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_oracle_many(sampler, |s| vec![statistic(s)], trials, seed)?[0])
}

/// Several statistics of the same draws, one estimate per output of `statistics`.
pub fn mc_oracle_many<S>(
    sampler: impl Fn(&mut Rng) -> S + Sync,
    statistics: impl Fn(&S) -> Vec<f64> + Sync,
    trials: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    let chunks = trials.div_ceil(CHUNK);
    let partial: Vec<Vec<Welford>> = pool()?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = Rng::with_stream(seed, c);
                let mut acc: Vec<Welford> = Vec::new();
                for _ in 0..CHUNK.min(trials - c * CHUNK) {
                    let values = statistics(&sampler(&mut rng));
                    acc.resize(values.len(), Welford::default());
                    acc.iter_mut().zip(values).for_each(|(w, v)| w.push(v));
                }
                acc
            })
            .collect()
    });
    let mut total: Vec<Welford> = Vec::new();
    for chunk in &partial {
        total.resize(total.len().max(chunk.len()), Welford::default());
        total.iter_mut().zip(chunk).for_each(|(t, c)| t.merge(c));
    }
    Ok(total.iter().map(Welford::estimate).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Welford::default(), Welford::default());
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.estimate().mean - all.estimate().mean).abs() < 1e-12);
        assert!((a.estimate().var - all.estimate().var).abs() < 1e-10);
    }

    #[test]
    fn uniform_moments() {
        let e = mc_oracle(|r| r.uniform(), |&u| u, 100_000, 3).unwrap();
        assert!((e.mean - 0.5).abs() < 4.0 * e.se);
        assert!((e.var - 1.0 / 12.0).abs() < 2e-3);
        assert_eq!(e.trials, 100_000);
    }
}
