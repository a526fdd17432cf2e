//! Per-state keys and the analytic optimum of the distillation loss.

use std::collections::HashMap;

use crate::nn::NnError;
use crate::scalar::Scalar;

/// Hashable identity of a state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub Vec<i64>);

/// How feature vectors are mapped to [`StateKey`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyMode {
    /// Bit-exact features; for discrete states.
    Exact,
    /// Fixed grid over `[lo, hi]` in every dimension, `bins` cells each.
    Grid { bins: usize, lo: f64, hi: f64 },
}

impl Default for KeyMode {
    fn default() -> Self {
        KeyMode::Grid {
            bins: 64,
            lo: -1.0,
            hi: 1.0,
        }
    }
}

impl KeyMode {
    pub fn key<T: Scalar>(&self, features: &[T]) -> StateKey {
        match *self {
            KeyMode::Exact => StateKey(
                features
                    .iter()
                    .map(|f| {
                        let x = f.as_f64();
                        // -0.0 and 0.0 are the same state
                        (if x == 0.0 { 0.0 } else { x }).to_bits() as i64
                    })
                    .collect(),
            ),
            KeyMode::Grid { bins, lo, hi } => StateKey(
                features
                    .iter()
                    .map(|f| {
                        let u = (f.as_f64() - lo) / (hi - lo);
                        ((u * bins as f64).floor() as i64).clamp(0, bins as i64 - 1)
                    })
                    .collect(),
            ),
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            KeyMode::Exact => 0,
            KeyMode::Grid { .. } => 1,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry<T> {
    count: u64,
    mean: Vec<T>,
}

/// Running mean of the sampled targets for every visited state; the exact
/// minimiser of the summed squared distillation loss.
#[derive(Debug, Clone)]
pub struct RunningMeanOracle<T> {
    dim: usize,
    entries: HashMap<StateKey, Entry<T>>,
}

impl<T: Scalar> RunningMeanOracle<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ingest(&mut self, key: StateKey, sample: &[T]) -> Result<(), NnError> {
        if sample.len() != self.dim {
            return Err(NnError::DimensionMismatch {
                what: "sampled target",
                expected: self.dim,
                actual: sample.len(),
            });
        }
        let entry = self.entries.entry(key).or_insert_with(|| Entry {
            count: 0,
            mean: vec![T::zero(); sample.len()],
        });
        entry.count += 1;
        let n = T::of(entry.count as f64);
        for (m, x) in entry.mean.iter_mut().zip(sample) {
            *m += (*x - *m) / n;
        }
        Ok(())
    }

    pub fn count(&self, key: &StateKey) -> u64 {
        self.entries.get(key).map_or(0, |e| e.count)
    }

    pub fn mean(&self, key: &StateKey) -> Option<&[T]> {
        self.entries.get(key).map(|e| e.mean.as_slice())
    }

    pub fn states(&self) -> usize {
        self.entries.len()
    }
}
