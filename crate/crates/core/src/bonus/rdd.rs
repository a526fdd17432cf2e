//! Random distribution distillation.
//!
//! The predictor is trained against a fresh Gaussian draw
//! `N(mu(s) 1_d, sigma^2 1_d)` on every presentation of a state, and the
//! bonus is the predictor's mean squared distance to the target *mean*:
//! `b(s) = ||f(s) - mu(s) 1_d||^2 / d`. With `sigma = 0` every draw equals the
//! mean and the estimator coincides with plain random network distillation.

use crate::estimator::{
    distill_minibatches, mean_sq_distance, BonusEstimator, EstimatorError, EstimatorKind, Result,
};
use crate::nn::{Activation, AdamConfig, AdamState, DenseLayer, DenseNet};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::snapshot::{SnapshotError, SnapshotReader, SnapshotWriter};

/// Where the per-state target mean comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMode<T> {
    Constant(T),
    /// Frozen scalar-output network, broadcast to all `d` coordinates.
    RandomNet {
        seed: u64,
    },
}

/// Frozen parameters of the target distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec<T> {
    pub mean_mode: MeanMode<T>,
    /// `0` selects the degenerate (RND-limit) distribution.
    pub sigma: T,
    pub d: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for TargetSpec<T> {
    fn default() -> Self {
        Self {
            mean_mode: MeanMode::Constant(T::one()),
            sigma: T::one(),
            d: 64,
            seed: 0,
        }
    }
}

impl<T: Scalar> TargetSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(EstimatorError::Config(
                "output dimension d must be positive".into(),
            ));
        }
        if !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(EstimatorError::Config(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if let MeanMode::Constant(mu) = self.mean_mode {
            if !mu.is_finite() {
                return Err(EstimatorError::Config("target mean must be finite".into()));
            }
        }
        Ok(())
    }
}

/// The target distribution bound to a state space.
#[derive(Debug, Clone)]
pub struct TargetDistribution<T> {
    spec: TargetSpec<T>,
    mean_net: Option<DenseNet<T>>,
}

impl<T: Scalar> TargetDistribution<T> {
    pub fn new(spec: TargetSpec<T>, input_dim: usize, hidden: &[usize]) -> Result<Self> {
        spec.validate()?;
        let mean_net = match spec.mean_mode {
            MeanMode::Constant(_) => None,
            MeanMode::RandomNet { seed } => Some(DenseNet::mlp(input_dim, hidden, 1, seed)),
        };
        Ok(Self { spec, mean_net })
    }

    pub fn spec(&self) -> &TargetSpec<T> {
        &self.spec
    }

    /// Scalar mean `mu(s)`.
    pub fn mean(&self, state: &[T]) -> Result<T> {
        match (&self.spec.mean_mode, &self.mean_net) {
            (MeanMode::Constant(mu), _) => Ok(*mu),
            (MeanMode::RandomNet { .. }, Some(net)) => Ok(net.forward(state)?[0]),
            (MeanMode::RandomNet { .. }, None) => {
                unreachable!("random mean mode always holds a network")
            }
        }
    }

    /// Mean vector `mu(s) 1_d`.
    pub fn mean_vector(&self, state: &[T]) -> Result<Vec<T>> {
        Ok(vec![self.mean(state)?; self.spec.d])
    }

    /// One draw from `N(mu(s) 1_d, sigma^2 1_d)`.
    pub fn sample(&self, state: &[T], rng: &mut Rng) -> Result<Vec<T>> {
        let mu = self.mean(state)?;
        Ok(sample_target(&self.spec, mu, rng))
    }

    /// A `d`-output network computing exactly `mu(s) 1_d`.
    pub fn as_network(&self, input_dim: usize) -> DenseNet<T> {
        let d = self.spec.d;
        match (&self.spec.mean_mode, &self.mean_net) {
            (MeanMode::Constant(mu), _) => {
                let layer = DenseLayer::from_parts(
                    input_dim,
                    d,
                    vec![T::zero(); input_dim * d],
                    vec![*mu; d],
                    Activation::Identity,
                )
                .expect("shapes agree");
                DenseNet::from_layers(vec![layer]).expect("single layer")
            }
            (MeanMode::RandomNet { .. }, Some(net)) => {
                let mut layers = net.layers().to_vec();
                let last = layers.pop().expect("non-empty");
                let weights = last
                    .weights
                    .iter()
                    .copied()
                    .cycle()
                    .take(last.weights.len() * d)
                    .collect();
                layers.push(
                    DenseLayer::from_parts(
                        last.in_dim(),
                        d,
                        weights,
                        vec![last.bias[0]; d],
                        last.activation,
                    )
                    .expect("shapes agree"),
                );
                DenseNet::from_layers(layers).expect("chain preserved")
            }
            (MeanMode::RandomNet { .. }, None) => {
                unreachable!("random mean mode always holds a network")
            }
        }
    }
}

/// Draw `mu 1_d + sigma * eps`, `eps ~ N(0, I_d)`; exactly `mu 1_d` when `sigma = 0`.
pub fn sample_target<T: Scalar>(spec: &TargetSpec<T>, mu: T, rng: &mut Rng) -> Vec<T> {
    if spec.sigma == T::zero() {
        return vec![mu; spec.d];
    }
    (0..spec.d)
        .map(|_| mu + spec.sigma * T::of(rng.normal()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RddConfig<T> {
    pub target: TargetSpec<T>,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// States per Adam step during distillation; `1` steps once per state.
    pub minibatch: usize,
}

impl<T: Scalar> RddConfig<T> {
    pub fn new(input_dim: usize, target: TargetSpec<T>) -> Self {
        Self {
            target,
            input_dim,
            hidden: vec![64, 64],
            lr: 3e-4,
            minibatch: 64,
        }
    }
}

/// Seeds of the predictor, shared with the RND baseline so the two agree
/// bit-for-bit in the `sigma = 0` limit.
pub(crate) fn predictor_seed(seed: u64) -> u64 {
    Rng::derive_seed(seed, 1)
}

pub(crate) fn sampling_seed(seed: u64) -> u64 {
    Rng::derive_seed(seed, 2)
}

#[derive(Debug, Clone)]
pub struct RddEstimator<T> {
    config: RddConfig<T>,
    target: TargetDistribution<T>,
    predictor: DenseNet<T>,
    adam: AdamState<T>,
    rng: Rng,
}

impl<T: Scalar> RddEstimator<T> {
    pub fn new(config: RddConfig<T>) -> Result<Self> {
        if config.input_dim == 0 {
            return Err(EstimatorError::Config(
                "input dimension must be positive".into(),
            ));
        }
        if !(config.lr > 0.0) {
            return Err(EstimatorError::Config(
                "learning rate must be positive".into(),
            ));
        }
        let target = TargetDistribution::new(config.target, config.input_dim, &config.hidden)?;
        let predictor = DenseNet::mlp(
            config.input_dim,
            &config.hidden,
            config.target.d,
            predictor_seed(config.target.seed),
        );
        let adam = AdamState::new(&predictor, AdamConfig::with_lr(config.lr));
        let rng = Rng::new(sampling_seed(config.target.seed));
        Ok(Self {
            config,
            target,
            predictor,
            adam,
            rng,
        })
    }

    pub fn config(&self) -> &RddConfig<T> {
        &self.config
    }

    pub fn target(&self) -> &TargetDistribution<T> {
        &self.target
    }

    pub fn predictor(&self) -> &DenseNet<T> {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut DenseNet<T> {
        &mut self.predictor
    }

    pub fn optimizer(&self) -> &AdamState<T> {
        &self.adam
    }

    /// Fresh target draw for `state`, advancing the sampling stream.
    pub fn sample_target(&mut self, state: &[T]) -> Result<Vec<T>> {
        self.target.sample(state, &mut self.rng)
    }

    /// Distils one fresh target draw per state; returns the batch-mean loss.
    pub fn distill_loss_and_update(&mut self, batch: &[Vec<T>]) -> Result<T> {
        let Self {
            target,
            predictor,
            adam,
            rng,
            config,
        } = self;
        distill_minibatches(predictor, adam, batch, config.minibatch, |s| {
            target.sample(s, rng)
        })
    }

    /// `||f(s) - mu(s) 1_d||^2 / d`.
    pub fn bonus_of(&self, state: &[T]) -> Result<T> {
        let f = self.predictor.forward(state)?;
        let mu = self.target.mean_vector(state)?;
        Ok(mean_sq_distance(&f, &mu))
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = SnapshotReader::open(bytes, EstimatorKind::Rdd)?;
        let d = r.usize()?;
        let sigma = r.real()?;
        let seed = r.u64()?;
        let mean_mode = match r.u8()? {
            0 => MeanMode::Constant(r.real()?),
            1 => MeanMode::RandomNet { seed: r.u64()? },
            t => return Err(SnapshotError::Corrupt(format!("mean mode tag {t}")).into()),
        };
        let input_dim = r.usize()?;
        let hidden = (0..r.usize()?)
            .map(|_| r.usize())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let lr = r.f64()?;
        let minibatch = r.usize()?;
        let config = RddConfig {
            target: TargetSpec {
                mean_mode,
                sigma,
                d,
                seed,
            },
            input_dim,
            hidden,
            lr,
            minibatch,
        };
        let mut est = Self::new(config)?;
        est.predictor = r.net()?;
        est.adam = r.adam(&est.predictor)?;
        est.rng = r.rng()?;
        if est.predictor.output_dim() != d {
            return Err(
                SnapshotError::Corrupt("predictor output dim differs from d".into()).into(),
            );
        }
        Ok(est)
    }
}

impl<T: Scalar> BonusEstimator<T> for RddEstimator<T> {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Rdd
    }

    fn bonus(&mut self, state: &[T]) -> Result<T> {
        self.bonus_of(state)
    }

    fn train(&mut self, batch: &[Vec<T>]) -> Result<T> {
        self.distill_loss_and_update(batch)
    }

    fn snapshot(&self) -> Vec<u8> {
        let mut w = SnapshotWriter::new(EstimatorKind::Rdd);
        let spec = &self.config.target;
        w.u64(spec.d as u64);
        w.real(spec.sigma);
        w.u64(spec.seed);
        match spec.mean_mode {
            MeanMode::Constant(mu) => {
                w.u8(0);
                w.real(mu);
            }
            MeanMode::RandomNet { seed } => {
                w.u8(1);
                w.u64(seed);
            }
        }
        w.u64(self.config.input_dim as u64);
        w.u64(self.config.hidden.len() as u64);
        self.config.hidden.iter().for_each(|h| w.u64(*h as u64));
        w.f64(self.config.lr);
        w.u64(self.config.minibatch as u64);
        w.net(&self.predictor);
        w.adam(&self.adam);
        w.rng(&self.rng);
        w.finish()
    }
}
