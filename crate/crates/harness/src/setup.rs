//! Builds environments, estimators and agents from a resolved config.

use rdd_core::baselines::{
    CountEstimator, DrndConfig, DrndEstimator, DrndTargets, RndConfig, RndEstimator,
};
use rdd_core::bonus::{KeyMode, MeanMode, RddConfig, RddEstimator, TargetSpec};
use rdd_core::envs::{ChainEnv, Env, EnvKind, GridEnv, MountainCarEnv};
use rdd_core::{DynEstimator, EstimatorKind, Rng};

use crate::config::{BonusKind, ExperimentConfig, MeanKind};
use crate::error::{HarnessError, Result};

pub fn build_env(cfg: &ExperimentConfig) -> Result<Box<dyn Env>> {
    let env: Box<dyn Env> = match cfg.env {
        EnvKind::Chain => {
            Box::new(ChainEnv::new(cfg.chain_length, cfg.features).map_err(config_err)?)
        }
        EnvKind::Grid => {
            Box::new(GridEnv::new(cfg.grid_size, cfg.grid_size, cfg.features).map_err(config_err)?)
        }
        EnvKind::MountainCar => Box::new(MountainCarEnv::default()),
    };
    Ok(env)
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Usage(e.to_string())
}

/// Five fixed states spread over the environment, for bonus probes.
pub fn probe_states(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    Ok(match cfg.env {
        EnvKind::Chain => {
            let env = ChainEnv::new(cfg.chain_length, cfg.features).map_err(config_err)?;
            let last = cfg.chain_length - 1;
            [0, last / 4, last / 2, 3 * last / 4, last]
                .iter()
                .map(|&p| env.features_of(p))
                .collect()
        }
        EnvKind::Grid => {
            let mut env =
                GridEnv::new(cfg.grid_size, cfg.grid_size, cfg.features).map_err(config_err)?;
            let g = cfg.grid_size - 1;
            let mut out = Vec::new();
            for (x, y) in [(0, 0), (g, 0), (0, g), (g / 4, g / 4), (g, g)] {
                env.set_cell(x, y).map_err(config_err)?;
                out.push(env.observation());
            }
            out
        }
        EnvKind::MountainCar => [-1.2, -0.9, -0.5, 0.0, 0.5]
            .iter()
            .map(|&p| MountainCarEnv::normalise(p, 0.0))
            .collect(),
    })
}

/// Seed shared by every estimator of one run, so RDD at `sigma = 0` and RND
/// start from the same predictor.
pub fn estimator_seed(run_seed: u64) -> u64 {
    Rng::derive_seed(run_seed, 7)
}

pub fn target_spec(cfg: &ExperimentConfig, run_seed: u64) -> TargetSpec<f64> {
    let seed = estimator_seed(run_seed);
    TargetSpec {
        mean_mode: match cfg.mean_mode {
            MeanKind::Constant => MeanMode::Constant(cfg.mu),
            MeanKind::Net => MeanMode::RandomNet {
                seed: Rng::derive_seed(seed, 3),
            },
        },
        sigma: cfg.sigma,
        d: cfg.dim,
        seed,
    }
}

/// The configured estimator, or `None` for the bonus-free baseline.
pub fn build_estimator(
    cfg: &ExperimentConfig,
    input_dim: usize,
    run_seed: u64,
) -> Result<Option<DynEstimator>> {
    let kind = match cfg.bonus {
        BonusKind::None => return Ok(None),
        BonusKind::Estimator(k) => k,
    };
    let seed = estimator_seed(run_seed);
    let est: DynEstimator = match kind {
        EstimatorKind::Rdd => {
            let mut c = RddConfig::new(input_dim, target_spec(cfg, run_seed));
            c.hidden = cfg.est_hidden.clone();
            c.lr = cfg.est_lr;
            c.minibatch = cfg.est_minibatch;
            Box::new(RddEstimator::new(c)?)
        }
        EstimatorKind::Rnd => Box::new(RndEstimator::new(RndConfig {
            input_dim,
            hidden: cfg.est_hidden.clone(),
            d: cfg.dim,
            seed,
            lr: cfg.est_lr,
            minibatch: cfg.est_minibatch,
        })?),
        EstimatorKind::Drnd => {
            let mut c = DrndConfig::new(input_dim, cfg.dim, cfg.drnd_n, seed);
            c.hidden = cfg.est_hidden.clone();
            c.targets = DrndTargets::Networks {
                hidden: cfg.est_hidden.clone(),
                seed: Rng::derive_seed(seed, 4),
            };
            c.lr = cfg.est_lr;
            c.minibatch = cfg.est_minibatch;
            Box::new(DrndEstimator::new(c)?)
        }
        EstimatorKind::Count => Box::new(CountEstimator::new(count_keys(cfg), cfg.count_sqrt)),
    };
    Ok(Some(est))
}

/// Exact keys for discrete environments, a 50-cell grid for MountainCar.
pub fn count_keys(cfg: &ExperimentConfig) -> KeyMode {
    match cfg.env {
        EnvKind::MountainCar => KeyMode::Grid {
            bins: 50,
            lo: -1.0,
            hi: 1.0,
        },
        EnvKind::Chain | EnvKind::Grid => KeyMode::Exact,
    }
}
