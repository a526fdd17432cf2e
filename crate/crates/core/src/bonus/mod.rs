//! Random distribution distillation: target distribution, estimator, the
//! analytic running-mean optimum and the closed-form visitation statistics.

pub mod oracle;
pub mod rdd;
pub mod statistics;

pub use oracle::{KeyMode, RunningMeanOracle, StateKey};
pub use rdd::{sample_target, MeanMode, RddConfig, RddEstimator, TargetDistribution, TargetSpec};
pub use statistics::{
    closed_form_var_y, closed_form_var_z, concentration_epsilon, moments_b234,
    y_statistic_population, y_statistic_population_vec, z_statistic, StatsError,
};
