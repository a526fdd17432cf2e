//! Tabular Q-learning and PPO agents driven by any bonus estimator.

use std::collections::HashSet;
use std::str::FromStr;

use thiserror::Error;

use crate::bonus::{KeyMode, StateKey};
use crate::envs::EnvError;
use crate::estimator::EstimatorError;
use crate::nn::NnError;

pub mod gae;
pub mod normalizer;
pub mod ppo;
pub mod qlearn;
pub mod trajectory;

pub use gae::gae;
pub use normalizer::RunningNormalizer;
pub use ppo::{run_ppo, PpoAgent, PpoBatch, PpoConfig, PpoLosses, PpoRunConfig, PpoRunOutput};
pub use qlearn::{run_qlearning, QConfig, QRunConfig, QTable, QTransition};
pub use trajectory::{Trajectory, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("length mismatch: {rewards} rewards, {values} values (expected rewards + 1), {dones} done flags")]
    LengthMismatch {
        rewards: usize,
        values: usize,
        dones: usize,
    },
    #[error("inconsistent shapes: {0}")]
    Ragged(String),
    #[error("environment has no finite state index")]
    NotTabular,
    #[error("non-finite loss: {0}")]
    NonFinite(String),
}

/// When the estimator is fitted during tabular runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainSchedule {
    #[default]
    EveryStep,
    EpisodeEnd,
}

impl FromStr for TrainSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "step" => Ok(Self::EveryStep),
            "episode" => Ok(Self::EpisodeEnd),
            _ => Err(format!(
                "unknown train schedule `{s}` (valid: step, episode)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode_index: u64,
    /// Environment steps taken by the run when the episode ended.
    pub global_step: u64,
    pub return_ext: f64,
    pub mean_bonus: f64,
    pub length: usize,
    pub success: bool,
    pub visited_states: usize,
    pub probe_bonuses: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub episodes: u64,
    pub successes: u64,
    pub first_success: Option<u64>,
    pub global_steps: u64,
}

impl RunSummary {
    fn record(&mut self, episode: u64, success: bool) {
        self.episodes += 1;
        if success {
            self.successes += 1;
            self.first_success.get_or_insert(episode);
        }
    }
}

/// Distinct states seen so far; continuous observations are binned.
#[derive(Debug, Clone, Default)]
pub struct VisitTracker {
    indices: HashSet<usize>,
    keys: HashSet<StateKey>,
}

impl VisitTracker {
    const GRID: KeyMode = KeyMode::Grid {
        bins: 50,
        lo: -1.0,
        hi: 1.0,
    };

    pub fn insert_index(&mut self, index: usize) {
        self.indices.insert(index);
    }

    pub fn insert_obs(&mut self, index: Option<usize>, obs: &[f64]) {
        match index {
            Some(i) => self.insert_index(i),
            None => {
                self.keys.insert(Self::GRID.key(obs));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len() + self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
