use std::collections::HashMap;

use crate::bonus::{KeyMode, StateKey};
use crate::estimator::{
    distill_minibatches, BonusEstimator, EstimatorError, EstimatorKind, Result,
};
use crate::nn::{AdamConfig, AdamState, DenseNet};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::snapshot::{SnapshotError, SnapshotReader, SnapshotWriter};

/// Floor applied to the per-dimension target variance `B2 - mu^2`.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Source of the `N` frozen targets.
#[derive(Debug, Clone, PartialEq)]
pub enum DrndTargets {
    /// Randomly initialised networks, one seed per target.
    Networks { hidden: Vec<usize>, seed: u64 },
    /// Each target's output at a state is an independent `N(mean, sigma^2)`
    /// draw per coordinate, fixed per (state, target) pair.
    Gaussian { mean: f64, sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrndConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub d: usize,
    pub n_targets: usize,
    pub targets: DrndTargets,
    pub seed: u64,
    pub lr: f64,
    pub minibatch: usize,
}

impl DrndConfig {
    pub fn new(input_dim: usize, d: usize, n_targets: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 64],
            d,
            n_targets,
            targets: DrndTargets::Networks {
                hidden: vec![64, 64],
                seed: Rng::derive_seed(seed, 4),
            },
            seed,
            lr: 3e-4,
            minibatch: 64,
        }
    }
}

/// First and second moments of the `N` target outputs at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMoments<T> {
    pub mean: Vec<T>,
    pub second: Vec<T>,
}

/// Distributional RND: `N` frozen targets, one chosen uniformly per
/// presentation; the visitation statistic compares the predictor's squared
/// output against the moments across targets.
#[derive(Debug, Clone)]
pub struct DrndEstimator<T> {
    config: DrndConfig,
    nets: Vec<DenseNet<T>>,
    predictor: DenseNet<T>,
    adam: AdamState<T>,
    rng: Rng,
    moments: HashMap<StateKey, TargetMoments<T>>,
    choice_counts: Vec<u64>,
}

impl<T: Scalar> DrndEstimator<T> {
    pub fn new(config: DrndConfig) -> Result<Self> {
        if config.n_targets < 2 {
            return Err(EstimatorError::Config(format!(
                "DRND needs at least 2 target networks, got {}",
                config.n_targets
            )));
        }
        if config.input_dim == 0 || config.d == 0 {
            return Err(EstimatorError::Config(
                "input and output dimensions must be positive".into(),
            ));
        }
        let nets = match &config.targets {
            DrndTargets::Networks { hidden, seed } => (0..config.n_targets)
                .map(|i| {
                    DenseNet::mlp(
                        config.input_dim,
                        hidden,
                        config.d,
                        Rng::derive_seed(*seed, i as u64),
                    )
                })
                .collect(),
            DrndTargets::Gaussian { sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(EstimatorError::Config(
                        "gaussian DRND targets need sigma > 0".into(),
                    ));
                }
                Vec::new()
            }
        };
        let predictor = DenseNet::mlp(
            config.input_dim,
            &config.hidden,
            config.d,
            Rng::derive_seed(config.seed, 1),
        );
        let adam = AdamState::new(&predictor, AdamConfig::with_lr(config.lr));
        let rng = Rng::new(Rng::derive_seed(config.seed, 5));
        let choice_counts = vec![0; config.n_targets];
        Ok(Self {
            config,
            nets,
            predictor,
            adam,
            rng,
            moments: HashMap::new(),
            choice_counts,
        })
    }

    pub fn config(&self) -> &DrndConfig {
        &self.config
    }

    pub fn predictor(&self) -> &DenseNet<T> {
        &self.predictor
    }

    pub fn n_targets(&self) -> usize {
        self.config.n_targets
    }

    /// How often each target has been chosen for training.
    pub fn choice_counts(&self) -> &[u64] {
        &self.choice_counts
    }

    /// Output of target `i` at `state`.
    pub fn target_output(&self, i: usize, state: &[T]) -> Result<Vec<T>> {
        match &self.config.targets {
            DrndTargets::Networks { .. } => Ok(self.nets[i].forward(state)?),
            DrndTargets::Gaussian { mean, sigma, seed } => {
                if state.len() != self.config.input_dim {
                    return Err(crate::nn::NnError::DimensionMismatch {
                        what: "network input",
                        expected: self.config.input_dim,
                        actual: state.len(),
                    }
                    .into());
                }
                let key = KeyMode::Exact.key(state);
                let state_seed = key
                    .0
                    .iter()
                    .fold(*seed, |acc, k| Rng::derive_seed(acc, *k as u64));
                let mut rng = Rng::with_stream(state_seed, i as u64);
                Ok((0..self.config.d)
                    .map(|_| T::of(mean + sigma * rng.normal()))
                    .collect())
            }
        }
    }

    /// Moments across targets at `state`, memoised per exact state.
    pub fn target_moments(&mut self, state: &[T]) -> Result<&TargetMoments<T>> {
        let key = KeyMode::Exact.key(state);
        if !self.moments.contains_key(&key) {
            let d = self.config.d;
            let mut sum = vec![T::zero(); d];
            let mut sq = vec![T::zero(); d];
            for i in 0..self.config.n_targets {
                let out = self.target_output(i, state)?;
                for j in 0..d {
                    sum[j] += out[j];
                    sq[j] += out[j] * out[j];
                }
            }
            let n = T::of(self.config.n_targets as f64);
            let m = TargetMoments {
                mean: sum.into_iter().map(|s| s / n).collect(),
                second: sq.into_iter().map(|s| s / n).collect(),
            };
            self.moments.insert(key.clone(), m);
        }
        Ok(&self.moments[&key])
    }

    /// Per-dimension ratios `max(f^2 - mu^2, 0) / max(B2 - mu^2, floor)` for an
    /// arbitrary estimate `f` of the running target mean.
    pub fn y_components(&mut self, state: &[T], f: &[T]) -> Result<Vec<T>> {
        let floor = T::of(VARIANCE_FLOOR);
        let m = self.target_moments(state)?;
        Ok(f.iter()
            .zip(m.mean.iter().zip(&m.second))
            .map(|(&fj, (&mu, &b2))| {
                let num = (fj * fj - mu * mu).max(T::zero());
                let den = (b2 - mu * mu).max(floor);
                num / den
            })
            .collect())
    }

    /// Dimension-averaged square-rooted statistic, the DRND bonus.
    pub fn y_rooted_with(&mut self, state: &[T], f: &[T]) -> Result<T> {
        let c = self.y_components(state, f)?;
        Ok(c.iter().fold(T::zero(), |a, x| a + x.sqrt()) / T::of(c.len() as f64))
    }

    /// Dimension-averaged un-rooted statistic; the estimate of `1/n`.
    pub fn y_ratio_with(&mut self, state: &[T], f: &[T]) -> Result<T> {
        let c = self.y_components(state, f)?;
        Ok(c.iter().fold(T::zero(), |a, x| a + *x) / T::of(c.len() as f64))
    }

    /// The rooted statistic evaluated at the predictor output.
    pub fn drnd_y_empirical(&mut self, state: &[T]) -> Result<T> {
        let f = self.predictor.forward(state)?;
        self.y_rooted_with(state, &f)
    }

    /// The un-rooted statistic evaluated at the predictor output.
    pub fn drnd_y_ratio(&mut self, state: &[T]) -> Result<T> {
        let f = self.predictor.forward(state)?;
        self.y_ratio_with(state, &f)
    }

    /// Uniform target index for one training presentation.
    pub fn pick_target(&mut self) -> usize {
        let i = self.rng.below(self.config.n_targets);
        self.choice_counts[i] += 1;
        i
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = SnapshotReader::open(bytes, EstimatorKind::Drnd)?;
        let input_dim = r.usize()?;
        let d = r.usize()?;
        let n_targets = r.usize()?;
        let seed = r.u64()?;
        let lr = r.f64()?;
        let minibatch = r.usize()?;
        let hidden = (0..r.usize()?)
            .map(|_| r.usize())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let targets = match r.u8()? {
            0 => {
                let th = (0..r.usize()?)
                    .map(|_| r.usize())
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                DrndTargets::Networks {
                    hidden: th,
                    seed: r.u64()?,
                }
            }
            1 => DrndTargets::Gaussian {
                mean: r.f64()?,
                sigma: r.f64()?,
                seed: r.u64()?,
            },
            t => return Err(SnapshotError::Corrupt(format!("target source tag {t}")).into()),
        };
        let mut est = Self::new(DrndConfig {
            input_dim,
            hidden,
            d,
            n_targets,
            targets,
            seed,
            lr,
            minibatch,
        })?;
        est.predictor = r.net()?;
        est.adam = r.adam(&est.predictor)?;
        est.rng = r.rng()?;
        for c in est.choice_counts.iter_mut() {
            *c = r.u64()?;
        }
        Ok(est)
    }
}

impl<T: Scalar> BonusEstimator<T> for DrndEstimator<T> {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Drnd
    }

    fn bonus(&mut self, state: &[T]) -> Result<T> {
        self.drnd_y_empirical(state)
    }

    fn train(&mut self, batch: &[Vec<T>]) -> Result<T> {
        // targets are chosen up front so the predictor borrow stays disjoint
        let mut chosen = Vec::with_capacity(batch.len());
        for s in batch {
            let i = self.pick_target();
            chosen.push(self.target_output(i, s)?);
        }
        let mut targets = chosen.into_iter();
        let minibatch = self.config.minibatch;
        distill_minibatches(
            &mut self.predictor,
            &mut self.adam,
            batch,
            minibatch,
            |_| Ok(targets.next().expect("one target per state")),
        )
    }

    fn snapshot(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = SnapshotWriter::new(EstimatorKind::Drnd);
        w.u64(c.input_dim as u64);
        w.u64(c.d as u64);
        w.u64(c.n_targets as u64);
        w.u64(c.seed);
        w.f64(c.lr);
        w.u64(c.minibatch as u64);
        w.u64(c.hidden.len() as u64);
        c.hidden.iter().for_each(|h| w.u64(*h as u64));
        match &c.targets {
            DrndTargets::Networks { hidden, seed } => {
                w.u8(0);
                w.u64(hidden.len() as u64);
                hidden.iter().for_each(|h| w.u64(*h as u64));
                w.u64(*seed);
            }
            DrndTargets::Gaussian { mean, sigma, seed } => {
                w.u8(1);
                w.f64(*mean);
                w.f64(*sigma);
                w.u64(*seed);
            }
        }
        w.net(&self.predictor);
        w.adam(&self.adam);
        w.rng(&self.rng);
        self.choice_counts.iter().for_each(|n| w.u64(*n));
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> DrndConfig {
        let mut c = DrndConfig::new(2, 4, n, 7);
        c.hidden = vec![8];
        c.targets = DrndTargets::Networks {
            hidden: vec![8],
            seed: 11,
        };
        c
    }

    #[test]
    fn needs_two_targets() {
        assert!(matches!(
            DrndEstimator::<f64>::new(small(1)),
            Err(EstimatorError::Config(_))
        ));
        assert!(DrndEstimator::<f64>::new(small(2)).is_ok());
    }

    #[test]
    fn zero_numerator_gives_zero() {
        let mut est = DrndEstimator::<f64>::new(small(5)).unwrap();
        let s = [0.2, -0.4];
        let mu = est.target_moments(&s).unwrap().mean.clone();
        assert_eq!(est.y_rooted_with(&s, &mu).unwrap(), 0.0);
        assert_eq!(est.y_ratio_with(&s, &mu).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_dominates() {
        for targets in [
            small(50).targets,
            DrndTargets::Gaussian {
                mean: 1.0,
                sigma: 1.0,
                seed: 3,
            },
        ] {
            let mut cfg = small(50);
            cfg.targets = targets;
            let mut est = DrndEstimator::<f64>::new(cfg).unwrap();
            for s in [[0.0, 0.0], [1.0, -2.0], [0.3, 0.3]] {
                let m = est.target_moments(&s).unwrap();
                for (mu, b2) in m.mean.iter().zip(&m.second) {
                    assert!(*b2 >= mu * mu - 1e-9);
                }
            }
        }
    }

    #[test]
    fn gaussian_targets_are_fixed_per_state() {
        let mut cfg = small(4);
        cfg.targets = DrndTargets::Gaussian {
            mean: 1.0,
            sigma: 1.0,
            seed: 3,
        };
        let est = DrndEstimator::<f64>::new(cfg).unwrap();
        let a = est.target_output(2, &[0.5, 0.5]).unwrap();
        assert_eq!(a, est.target_output(2, &[0.5, 0.5]).unwrap());
        assert_ne!(a, est.target_output(3, &[0.5, 0.5]).unwrap());
        assert_ne!(a, est.target_output(2, &[0.5, 0.6]).unwrap());
    }

    #[test]
    fn bonus_nonnegative_and_stable_between_trains() {
        let mut est = DrndEstimator::<f64>::new(small(10)).unwrap();
        let s = [0.9, 0.1];
        let b = est.bonus(&s).unwrap();
        assert!(b >= 0.0);
        assert_eq!(b, est.bonus(&s).unwrap());
        est.train(&[s.to_vec()]).unwrap();
        assert!(est.bonus(&s).unwrap() >= 0.0);
    }

    #[test]
    fn target_choice_is_uniform() {
        let n = 10;
        let mut est = DrndEstimator::<f64>::new(small(n)).unwrap();
        for _ in 0..10_000 {
            est.pick_target();
        }
        let expected = 10_000.0 / n as f64;
        let chi2: f64 = est
            .choice_counts()
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square with 9 degrees of freedom, p = 0.01 critical value
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut a = DrndEstimator::<f64>::new(small(6)).unwrap();
        a.train(&[vec![0.1, 0.2], vec![0.3, 0.1]]).unwrap();
        let mut b = DrndEstimator::<f64>::restore(&a.snapshot()).unwrap();
        assert_eq!(a.choice_counts(), b.choice_counts());
        let batch = [vec![0.4, 0.4]];
        assert_eq!(a.train(&batch).unwrap(), b.train(&batch).unwrap());
        assert_eq!(a.bonus(&[0.4, 0.4]).unwrap(), b.bonus(&[0.4, 0.4]).unwrap());
    }
}
