//! Worker pool sized by `RDD_WORKERS`.

use rayon::ThreadPool;

use crate::error::{HarnessError, Result};

pub const WORKERS_VAR: &str = "RDD_WORKERS";

/// Worker count from `RDD_WORKERS`, else the available parallelism.
pub fn workers() -> Result<usize> {
    match std::env::var(WORKERS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(HarnessError::Usage(format!(
                "{WORKERS_VAR} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn pool() -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| HarnessError::Run(format!("cannot start worker pool: {e}")))
}
