use super::{check_action, Env, EnvError, Observation, Step};
use crate::rng::Rng;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;

/// Classic underpowered car in a valley; actions push left, coast, push right.
/// Reward is 1 on reaching the goal position and 0 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MountainCarEnv {
    horizon: usize,
    position: f64,
    velocity: f64,
    steps: usize,
}

impl Default for MountainCarEnv {
    fn default() -> Self {
        Self::new(200).expect("default horizon is valid")
    }
}

impl MountainCarEnv {
    pub fn new(horizon: usize) -> Result<Self, EnvError> {
        if horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        Ok(Self {
            horizon,
            position: -0.5,
            velocity: 0.0,
            steps: 0,
        })
    }

    pub fn with_state(horizon: usize, position: f64, velocity: f64) -> Result<Self, EnvError> {
        let mut env = Self::new(horizon)?;
        env.position = position.clamp(MIN_POSITION, MAX_POSITION);
        env.velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        Ok(env)
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Raw state mapped to `[-1, 1]^2`.
    pub fn normalise(position: f64, velocity: f64) -> Observation {
        let p = 2.0 * (position - MIN_POSITION) / (MAX_POSITION - MIN_POSITION) - 1.0;
        vec![p, velocity / MAX_SPEED]
    }
}

impl Env for MountainCarEnv {
    fn obs_dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.position = Rng::new(seed).uniform_in(-0.6, -0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        check_action(action, 3)?;
        let push = action as f64 - 1.0;
        self.velocity += push * FORCE - GRAVITY * (3.0 * self.position).cos();
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity).clamp(MIN_POSITION, MAX_POSITION);
        if self.position <= MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.steps += 1;
        let success = self.position >= GOAL_POSITION;
        Ok(Step {
            obs: self.observation(),
            reward: if success { 1.0 } else { 0.0 },
            done: success || self.steps >= self.horizon,
            success,
        })
    }

    fn observation(&self) -> Observation {
        Self::normalise(self.position, self.velocity)
    }

    fn state_index(&self) -> Option<usize> {
        None
    }

    fn num_states(&self) -> Option<usize> {
        None
    }

    fn position(&self) -> Option<f64> {
        Some(self.position)
    }
}
