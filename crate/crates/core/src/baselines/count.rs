use std::collections::HashMap;

use crate::bonus::{KeyMode, StateKey};
use crate::estimator::{check_batch, BonusEstimator, EstimatorKind, Result};
use crate::scalar::Scalar;
use crate::snapshot::{SnapshotError, SnapshotReader, SnapshotWriter};

/// Exact visit counts over discretised states.
///
/// The bonus is `1/n(s)` (or `1/sqrt(n(s))` with `sqrt` set); unseen states
/// get `1`. `train` only increments counts.
#[derive(Debug, Clone, Default)]
pub struct CountEstimator {
    key_mode: KeyMode,
    sqrt: bool,
    counts: HashMap<StateKey, u64>,
}

impl CountEstimator {
    pub fn new(key_mode: KeyMode, sqrt: bool) -> Self {
        Self {
            key_mode,
            sqrt,
            counts: HashMap::new(),
        }
    }

    pub fn key_mode(&self) -> KeyMode {
        self.key_mode
    }

    pub fn visits<T: Scalar>(&self, state: &[T]) -> u64 {
        self.counts
            .get(&self.key_mode.key(state))
            .copied()
            .unwrap_or(0)
    }

    pub fn distinct_states(&self) -> usize {
        self.counts.len()
    }

    pub fn record<T: Scalar>(&mut self, state: &[T]) {
        *self.counts.entry(self.key_mode.key(state)).or_insert(0) += 1;
    }

    pub fn count_bonus<T: Scalar>(&self, state: &[T]) -> T {
        let n = self.visits(state).max(1) as f64;
        T::of(if self.sqrt { 1.0 / n.sqrt() } else { 1.0 / n })
    }

    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = SnapshotReader::open(bytes, EstimatorKind::Count)?;
        let key_mode = match r.u8()? {
            0 => KeyMode::Exact,
            1 => KeyMode::Grid {
                bins: r.usize()?,
                lo: r.f64()?,
                hi: r.f64()?,
            },
            t => return Err(SnapshotError::Corrupt(format!("key mode tag {t}")).into()),
        };
        let sqrt = r.u8()? != 0;
        let entries = r.usize()?;
        let mut counts = HashMap::with_capacity(entries.min(1 << 20));
        for _ in 0..entries {
            let len = r.usize()?;
            let key = (0..len)
                .map(|_| r.u64().map(|v| v as i64))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            counts.insert(StateKey(key), r.u64()?);
        }
        Ok(Self {
            key_mode,
            sqrt,
            counts,
        })
    }
}

impl<T: Scalar> BonusEstimator<T> for CountEstimator {
    fn kind(&self) -> EstimatorKind {
        EstimatorKind::Count
    }

    fn bonus(&mut self, state: &[T]) -> Result<T> {
        Ok(self.count_bonus(state))
    }

    fn train(&mut self, batch: &[Vec<T>]) -> Result<T> {
        check_batch(batch)?;
        batch.iter().for_each(|s| self.record(s));
        Ok(T::zero())
    }

    fn snapshot(&self) -> Vec<u8> {
        let mut w = SnapshotWriter::new(EstimatorKind::Count);
        w.u8(self.key_mode.tag());
        if let KeyMode::Grid { bins, lo, hi } = self.key_mode {
            w.u64(bins as u64);
            w.f64(lo);
            w.f64(hi);
        }
        w.u8(self.sqrt as u8);
        let mut entries: Vec<_> = self.counts.iter().collect();
        entries.sort();
        w.u64(entries.len() as u64);
        for (key, n) in entries {
            w.u64(key.0.len() as u64);
            key.0.iter().for_each(|k| w.u64(*k as u64));
            w.u64(*n);
        }
        w.finish()
    }
}
