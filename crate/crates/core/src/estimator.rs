//! Common contract shared by every exploration-bonus estimator.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bonus::statistics::StatsError;
use crate::nn::NnError;
use crate::scalar::Scalar;
use crate::snapshot::SnapshotError;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("invalid estimator configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Rdd,
    Rnd,
    Drnd,
    Count,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Rdd, Self::Rnd, Self::Drnd, Self::Count];

    pub fn tag(self) -> u8 {
        match self {
            Self::Rdd => 0,
            Self::Rnd => 1,
            Self::Drnd => 2,
            Self::Count => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rdd => "rdd",
            Self::Rnd => "rnd",
            Self::Drnd => "drnd",
            Self::Count => "count",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown estimator `{s}` (valid: rdd, rnd, drnd, count)"))
    }
}

/// An intrinsic-reward model.
///
/// `bonus` may be queried before any call to `train` and must return the same
/// value for the same state until the next `train`. Implementations take
/// `&mut self` for `bonus` only to memoise per-state quantities.
pub trait BonusEstimator<T: Scalar>: Send {
    fn kind(&self) -> EstimatorKind;

    fn bonus(&mut self, state: &[T]) -> Result<T>;

    /// One update on the batch of states; returns the batch-mean loss
    /// (zero for estimators without a loss).
    fn train(&mut self, batch: &[Vec<T>]) -> Result<T>;

    fn snapshot(&self) -> Vec<u8>;
}

/// Rebuilds any estimator from bytes produced by [`BonusEstimator::snapshot`].
pub fn restore<T: Scalar>(bytes: &[u8]) -> Result<Box<dyn BonusEstimator<T>>> {
    let kind = crate::snapshot::peek_kind(bytes)?;
    Ok(match kind {
        EstimatorKind::Rdd => Box::new(crate::bonus::RddEstimator::<T>::restore(bytes)?),
        EstimatorKind::Rnd => Box::new(crate::baselines::RndEstimator::<T>::restore(bytes)?),
        EstimatorKind::Drnd => Box::new(crate::baselines::DrndEstimator::<T>::restore(bytes)?),
        EstimatorKind::Count => Box::new(crate::baselines::CountEstimator::restore(bytes)?),
    })
}

/// `(1/d) ||a - b||^2`.
pub(crate) fn mean_sq_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let sq = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y));
    sq / T::of(a.len() as f64)
}

pub(crate) fn check_batch<T>(batch: &[Vec<T>]) -> Result<()> {
    if batch.is_empty() {
        Err(EstimatorError::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Distils `target_for(state)` into `predictor` with one Adam step per
/// minibatch on the mean of `||f(s) - t||^2 / d`. Returns the mean
/// pre-update loss over the whole batch.
pub(crate) fn distill_minibatches<T: Scalar>(
    predictor: &mut crate::nn::DenseNet<T>,
    adam: &mut crate::nn::AdamState<T>,
    batch: &[Vec<T>],
    minibatch: usize,
    mut target_for: impl FnMut(&[T]) -> Result<Vec<T>>,
) -> Result<T> {
    check_batch(batch)?;
    let d = T::of(predictor.output_dim() as f64);
    let mut total = T::zero();
    for chunk in batch.chunks(minibatch.max(1)) {
        let mut grads = crate::nn::Gradients::zeros_like(predictor);
        for state in chunk {
            let target = target_for(state)?;
            let (loss, g) = predictor.backward_mse(state, &target)?;
            total += loss / d;
            grads.add_assign(&g);
        }
        grads.scale(T::one() / (d * T::of(chunk.len() as f64)));
        crate::nn::adam_step(predictor, &grads, adam)?;
    }
    Ok(total / T::of(batch.len() as f64))
}
