//! Pilot calibration of the episode budget for tabular runs.
//!
//! Pilot seeds are run until their first success, capped at `pilot_cap`
//! episodes. The budget is 1.5 times the episode count by which 80% of the
//! pilots had succeeded, so a seed drawn like the pilots fails the budget
//! with probability of roughly one in five before the 1.5 margin.

use rayon::prelude::*;

use crate::commands::train::{train_seed, RunMode};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::pool::pool;

pub const SUCCESS_QUANTILE: f64 = 0.8;
pub const BUDGET_MARGIN: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub pilot_seeds: Vec<u64>,
    /// Episodes until the first success, `None` when the cap was hit.
    pub episodes_to_success: Vec<Option<u64>>,
    /// Nearest-rank quantile of `episodes_to_success`; `None` if it is a failure.
    pub quantile: Option<u64>,
    pub budget: u64,
}

impl Calibration {
    pub fn notes(&self) -> Vec<(String, String)> {
        let successes = self.episodes_to_success.iter().flatten().count();
        vec![
            ("budget_episodes".into(), self.budget.to_string()),
            (
                "pilot_quantile_episodes".into(),
                self.quantile.map_or("none".into(), |q| q.to_string()),
            ),
            (
                "pilot_successes".into(),
                format!("{successes}/{}", self.pilot_seeds.len()),
            ),
            (
                "pilot_seeds".into(),
                self.pilot_seeds
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        ]
    }
}

/// Nearest-rank quantile with failures ranked last.
pub fn success_quantile(episodes: &[Option<u64>], q: f64) -> Option<u64> {
    if episodes.is_empty() {
        return None;
    }
    let mut sorted: Vec<u64> = episodes.iter().map(|e| e.unwrap_or(u64::MAX)).collect();
    sorted.sort_unstable();
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1]).filter(|&v| v != u64::MAX)
}

pub fn budget_from(quantile: Option<u64>, cap: u64) -> u64 {
    quantile.map_or(cap, |q| (q as f64 * BUDGET_MARGIN).ceil() as u64)
}

/// Runs the pilots of a resolved tabular config.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration> {
    let mut pilot = cfg.clone();
    pilot.episodes = cfg.pilot_cap;
    let mode = RunMode {
        dry: true,
        stop_at_first_success: true,
        ..RunMode::default()
    };
    let runs: Vec<_> = pool()?.install(|| {
        cfg.pilot_seeds
            .par_iter()
            .map(|&s| train_seed(&pilot, s, &mode))
            .collect::<Result<Vec<_>>>()
    })?;
    let episodes_to_success: Vec<Option<u64>> = runs
        .iter()
        .map(|r| r.summary.first_success.map(|e| e + 1))
        .collect();
    let quantile = success_quantile(&episodes_to_success, SUCCESS_QUANTILE);
    Ok(Calibration {
        pilot_seeds: cfg.pilot_seeds.clone(),
        episodes_to_success,
        quantile,
        budget: budget_from(quantile, cfg.pilot_cap),
    })
}
