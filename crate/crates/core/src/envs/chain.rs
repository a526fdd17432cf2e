use super::{check_action, Env, EnvError, FeatureMode, Observation, Step};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// `L` states in a row; reward 1 only on reaching the right end.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnv {
    length: usize,
    horizon: usize,
    features: FeatureMode,
    position: usize,
    steps: usize,
}

impl ChainEnv {
    /// Chain of `length` states with the default horizon `2 * length`.
    pub fn new(length: usize, features: FeatureMode) -> Result<Self, EnvError> {
        Self::with_horizon(length, 2 * length, features)
    }

    pub fn with_horizon(
        length: usize,
        horizon: usize,
        features: FeatureMode,
    ) -> Result<Self, EnvError> {
        if length < 2 {
            return Err(EnvError::Config(format!(
                "chain length must be >= 2, got {length}"
            )));
        }
        if horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        Ok(Self {
            length,
            horizon,
            features,
            position: 0,
            steps: 0,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn cursor(&self) -> usize {
        self.position
    }

    pub fn set_position(&mut self, position: usize) {
        self.position = position.min(self.length - 1);
    }

    pub fn features_of(&self, position: usize) -> Observation {
        match self.features {
            FeatureMode::Compact => vec![position as f64 / (self.length - 1) as f64],
            FeatureMode::OneHot => {
                let mut v = vec![0.0; self.length];
                v[position] = 1.0;
                v
            }
        }
    }
}

impl Env for ChainEnv {
    fn obs_dim(&self) -> usize {
        match self.features {
            FeatureMode::Compact => 1,
            FeatureMode::OneHot => self.length,
        }
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.position = 0;
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        check_action(action, 2)?;
        self.position = match action {
            LEFT => self.position.saturating_sub(1),
            _ => (self.position + 1).min(self.length - 1),
        };
        self.steps += 1;
        let success = self.position == self.length - 1;
        Ok(Step {
            obs: self.observation(),
            reward: if success { 1.0 } else { 0.0 },
            done: success || self.steps >= self.horizon,
            success,
        })
    }

    fn observation(&self) -> Observation {
        self.features_of(self.position)
    }

    fn state_index(&self) -> Option<usize> {
        Some(self.position)
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.length)
    }

    fn position(&self) -> Option<f64> {
        Some(self.position as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_to_start() {
        let mut env = ChainEnv::new(10, FeatureMode::Compact).unwrap();
        env.set_position(5);
        assert_eq!(env.reset(1), vec![0.0]);
        assert_eq!(env.cursor(), 0);
    }

    #[test]
    fn goal_step() {
        let mut env = ChainEnv::new(10, FeatureMode::OneHot).unwrap();
        env.set_position(8);
        let step = env.step(RIGHT).unwrap();
        assert_eq!(step.reward, 1.0);
        assert!(step.done && step.success);
        assert_eq!(step.obs[9], 1.0);
    }

    #[test]
    fn left_wall_and_horizon() {
        let mut env = ChainEnv::new(4, FeatureMode::Compact).unwrap();
        env.reset(0);
        for k in 1..=8 {
            let s = env.step(LEFT).unwrap();
            assert_eq!(s.reward, 0.0);
            assert_eq!(s.done, k == 8);
        }
        assert_eq!(env.cursor(), 0);
    }

    #[test]
    fn invalid_action() {
        let mut env = ChainEnv::new(4, FeatureMode::Compact).unwrap();
        assert_eq!(
            env.step(2),
            Err(EnvError::InvalidAction {
                action: 2,
                num_actions: 2
            })
        );
        assert!(ChainEnv::new(1, FeatureMode::Compact).is_err());
    }
}
