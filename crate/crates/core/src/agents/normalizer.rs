/// Streaming mean and variance (Welford).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunningNormalizer {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn update_all(&mut self, xs: &[f64]) {
        xs.iter().for_each(|&x| self.update(x));
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance of everything ingested so far.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `x / std`, leaving `x` untouched while the spread is still degenerate.
    pub fn scale(&self, x: f64) -> f64 {
        let s = self.std();
        if s > 1e-8 {
            x / s
        } else {
            x
        }
    }
}
