use crate::bonus::rdd::predictor_seed;
use crate::estimator::{
    distill_minibatches, mean_sq_distance, BonusEstimator, EstimatorError, EstimatorKind, Result,
};
use crate::nn::{AdamConfig, AdamState, DenseNet};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::snapshot::{SnapshotError, SnapshotReader, SnapshotWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct RndConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub d: usize,
    pub seed: u64,
    pub lr: f64,
    pub minibatch: usize,
}

impl RndConfig {
    pub fn new(input_dim: usize, d: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden: vec![64, 64],
            d,
            seed,
            lr: 3e-4,
            minibatch: 64,
        }
    }
}

/// Random network distillation: a predictor regressed onto a frozen random
/// network; the bonus is their mean squared disagreement.
#[derive(Debug, Clone)]
pub struct RndEstimator<T> {
    config: RndConfig,
    target: DenseNet<T>,
    predictor: DenseNet<T>,
    adam: AdamState<T>,
}

impl<T: Scalar> RndEstimator<T> {
    pub fn new(config: RndConfig) -> Result<Self> {
        let target = DenseNet::mlp(
            config.input_dim,
            &config.hidden,
            config.d,
            Rng::derive_seed(config.seed, 3),
        );
        Self::with_target(config, target)
    }

    /// Uses `target` as the frozen network instead of a fresh random one.
    pub fn with_target(config: RndConfig, target: DenseNet<T>) -> Result<Self> {
        if config.input_dim == 0 || config.d == 0 {
            return Err(EstimatorError::Config(
                "input and output dimensions must be positive".into(),
            ));
        }
        if target.input_dim() != config.input_dim || target.output_dim() != config.d {
            return Err(EstimatorError::Config(format!(
                "target network maps {} -> {}, expected {} -> {}",
                target.input_dim(),
                target.output_dim(),
                config.input_dim,
                config.d
            )));
        }
        let predictor = DenseNet::mlp(
            config.input_dim,
            &config.hidden,
            config.d,
            predictor_seed(config.seed),
        );
        let adam = AdamState::new(&predictor, AdamConfig::with_lr(config.lr));
        Ok(Self {
            config,
            target,
            predictor,
            adam,
        })
    }

    pub fn config(&self) -> &RndConfig {
        &self.config
    }

    pub fn target(&self) -> &DenseNet<T> {
        &self.target
    }

    pub fn predictor(&self) -> &DenseNet<T> {
        &self.predictor
    }

    pub fn predictor_mut(&mut self) -> &mut DenseNet<T> {
        &mut self.predictor
    }

    /// `||f(s) - g(s)||^2 / d` for predictor `f` and frozen target `g`.
    pub fn rnd_bonus(&self, state: &[T]) -> Result<T> {
        let f = self.predictor.forward(state)?;
        let g = self.target.forward(state)?;
        Ok(mean_sq_distance(&f, &g))
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = SnapshotReader::open(bytes, EstimatorKind::Rnd)?;
        let seed = r.u64()?;
        let lr = r.f64()?;
        let minibatch = r.usize()?;
        let hidden = (0..r.usize()?)
            .map(|_| r.usize())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let target: DenseNet<T> = r.net()?;
        let predictor: DenseNet<T> = r.net()?;
        let adam = r.adam(&predictor)?;
        if predictor.input_dim() != target.input_dim()
            || predictor.output_dim() != target.output_dim()
        {
            return Err(SnapshotError::Corrupt("predictor and target shapes differ".into()).into());
        }
        Ok(Self {
            config: RndConfig {
                input_dim: target.input_dim(),
                hidden,
                d: target.output_dim(),
                seed,
                lr,
                minibatch,
            },
            target,
            predictor,
            adam,
        })
    }
}

impl<T: Scalar> BonusEstimator<T> for RndEstimator<T> {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Rnd
    }

    fn bonus(&mut self, state: &[T]) -> Result<T> {
        self.rnd_bonus(state)
    }

    fn train(&mut self, batch: &[Vec<T>]) -> Result<T> {
        let Self {
            target,
            predictor,
            adam,
            config,
        } = self;
        distill_minibatches(predictor, adam, batch, config.minibatch, |s| {
            Ok(target.forward(s)?)
        })
    }

    fn snapshot(&self) -> Vec<u8> {
        let mut w = SnapshotWriter::new(EstimatorKind::Rnd);
        w.u64(self.config.seed);
        w.f64(self.config.lr);
        w.u64(self.config.minibatch as u64);
        w.u64(self.config.hidden.len() as u64);
        self.config.hidden.iter().for_each(|h| w.u64(*h as u64));
        w.net(&self.target);
        w.net(&self.predictor);
        w.adam(&self.adam);
        w.finish()
    }
}
