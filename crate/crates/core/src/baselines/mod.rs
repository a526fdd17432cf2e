//! Comparison estimators behind the same [`BonusEstimator`](crate::BonusEstimator)
//! contract: random network distillation, its distributional variant with
//! `N` targets, and exact visit counts.

pub mod count;
pub mod drnd;
pub mod rnd;

pub use count::CountEstimator;
pub use drnd::{DrndConfig, DrndEstimator, DrndTargets, TargetMoments};
pub use rnd::{RndConfig, RndEstimator};
