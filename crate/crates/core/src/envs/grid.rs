use super::{check_action, Env, EnvError, FeatureMode, Observation, Step};

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;

/// Four rooms separated by walls with one-cell doorways; start in the
/// top-left corner, reward 1 in the bottom-right corner.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnv {
    width: usize,
    height: usize,
    horizon: usize,
    features: FeatureMode,
    walls: Vec<bool>,
    x: usize,
    y: usize,
    steps: usize,
}

impl GridEnv {
    /// Grid with the default horizon `4 * (width + height)`.
    pub fn new(width: usize, height: usize, features: FeatureMode) -> Result<Self, EnvError> {
        Self::with_horizon(width, height, 4 * (width + height), features)
    }

    pub fn with_horizon(
        width: usize,
        height: usize,
        horizon: usize,
        features: FeatureMode,
    ) -> Result<Self, EnvError> {
        if width < 5 || height < 5 {
            return Err(EnvError::Config(format!(
                "grid must be at least 5x5, got {width}x{height}"
            )));
        }
        if horizon == 0 {
            return Err(EnvError::Config("horizon must be positive".into()));
        }
        let (wx, wy) = (width / 2, height / 2);
        let (door_y, door_x) = (
            [wy / 2, wy + (height - wy) / 2],
            [wx / 2, wx + (width - wx) / 2],
        );
        let mut walls = vec![false; width * height];
        for y in 0..height {
            if !door_y.contains(&y) {
                walls[y * width + wx] = true;
            }
        }
        for x in 0..width {
            if !door_x.contains(&x) {
                walls[wy * width + x] = true;
            }
        }
        Ok(Self {
            width,
            height,
            horizon,
            features,
            walls,
            x: 0,
            y: 0,
            steps: 0,
        })
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.x, self.y)
    }

    pub fn set_cell(&mut self, x: usize, y: usize) -> Result<(), EnvError> {
        if x >= self.width || y >= self.height || self.is_wall(x, y) {
            return Err(EnvError::Config(format!("cell ({x}, {y}) is not free")));
        }
        self.x = x;
        self.y = y;
        Ok(())
    }

    fn goal(&self) -> (usize, usize) {
        (self.width - 1, self.height - 1)
    }
}

impl Env for GridEnv {
    fn obs_dim(&self) -> usize {
        match self.features {
            FeatureMode::Compact => 2,
            FeatureMode::OneHot => self.width * self.height,
        }
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn reset(&mut self, _seed: u64) -> Observation {
        self.x = 0;
        self.y = 0;
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        check_action(action, 4)?;
        let (x, y) = (self.x as i64, self.y as i64);
        let (nx, ny) = match action {
            UP => (x, y - 1),
            RIGHT => (x + 1, y),
            DOWN => (x, y + 1),
            _ => (x - 1, y),
        };
        let inside =
            nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height;
        if inside && !self.is_wall(nx as usize, ny as usize) {
            self.x = nx as usize;
            self.y = ny as usize;
        }
        self.steps += 1;
        let success = (self.x, self.y) == self.goal();
        Ok(Step {
            obs: self.observation(),
            reward: if success { 1.0 } else { 0.0 },
            done: success || self.steps >= self.horizon,
            success,
        })
    }

    fn observation(&self) -> Observation {
        match self.features {
            FeatureMode::Compact => vec![
                self.x as f64 / (self.width - 1) as f64,
                self.y as f64 / (self.height - 1) as f64,
            ],
            FeatureMode::OneHot => {
                let mut v = vec![0.0; self.width * self.height];
                v[self.y * self.width + self.x] = 1.0;
                v
            }
        }
    }

    fn state_index(&self) -> Option<usize> {
        Some(self.y * self.width + self.x)
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.width * self.height)
    }

    fn position(&self) -> Option<f64> {
        Some(self.x as f64)
    }
}
