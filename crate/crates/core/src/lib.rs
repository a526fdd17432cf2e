//! Random distribution distillation (RDD) exploration bonuses.
//!
//! A predictor network is distilled towards Gaussian draws
//! `N(mu(s) 1_d, sigma^2 1_d)`; its squared distance to the target mean
//! behaves like a pseudo-count `sigma^2 / n(s)` plus a predictor discrepancy
//! term. The crate also carries the comparison estimators (RND, DRND, exact
//! counts), desk-scale sparse-reward environments, and tabular Q-learning and
//! PPO agents that consume any estimator.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod agents;
pub mod baselines;
pub mod bonus;
pub mod envs;
pub mod estimator;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod snapshot;

pub use estimator::{restore, BonusEstimator, EstimatorError, EstimatorKind};
pub use rng::Rng;
pub use scalar::{Exact, Scalar};

pub type DenseNet64 = nn::DenseNet<f64>;
pub type DenseNet32 = nn::DenseNet<f32>;
pub type RddEstimator64 = bonus::RddEstimator<f64>;
pub type RndEstimator64 = baselines::RndEstimator<f64>;
pub type DrndEstimator64 = baselines::DrndEstimator<f64>;
pub type TargetSpec64 = bonus::TargetSpec<f64>;
pub type DynEstimator = Box<dyn BonusEstimator<f64>>;
