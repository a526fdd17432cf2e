//! Desk-scale sparse-reward environments.
//!
//! Every environment is a value-like object whose transitions are pure
//! functions of its state, the action and (for resets) the seed.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub mod chain;
pub mod density;
pub mod grid;
pub mod mountain_car;

pub use chain::ChainEnv;
pub use density::{fraction_at_least, occupied_bins, xpos_density};
pub use grid::GridEnv;
pub use mountain_car::MountainCarEnv;

/// Feature vector handed to agents and estimators.
pub type Observation = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid action {action}; valid actions are 0..{num_actions}")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("invalid environment configuration: {0}")]
    Config(String),
    #[error("density window is empty")]
    EmptyWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// Goal reached on this transition.
    pub success: bool,
}

/// How discrete environments encode their state as features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// Normalised coordinates in `[0, 1]`.
    #[default]
    Compact,
    OneHot,
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compact" => Ok(Self::Compact),
            "onehot" => Ok(Self::OneHot),
            _ => Err(format!(
                "unknown feature mode `{s}` (valid: compact, onehot)"
            )),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Compact => "compact",
            Self::OneHot => "onehot",
        })
    }
}

pub trait Env: Send {
    fn obs_dim(&self) -> usize;

    fn num_actions(&self) -> usize;

    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: usize) -> Result<Step, EnvError>;

    fn observation(&self) -> Observation;

    /// Index of the current state for tabular agents, if the state space is finite.
    fn state_index(&self) -> Option<usize>;

    fn num_states(&self) -> Option<usize>;

    /// Horizontal position, for environments where it measures progress.
    fn position(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Chain,
    Grid,
    MountainCar,
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(Self::Chain),
            "grid" => Ok(Self::Grid),
            "mountaincar" => Ok(Self::MountainCar),
            _ => Err(format!(
                "unknown env `{s}` (valid: chain, grid, mountaincar)"
            )),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Chain => "chain",
            Self::Grid => "grid",
            Self::MountainCar => "mountaincar",
        })
    }
}

pub(crate) fn check_action(action: usize, num_actions: usize) -> Result<(), EnvError> {
    if action < num_actions {
        Ok(())
    } else {
        Err(EnvError::InvalidAction {
            action,
            num_actions,
        })
    }
}
