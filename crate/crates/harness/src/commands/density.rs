//! `density`: windowed x-position histograms of PPO runs on MountainCar.

use rdd_core::envs::mountain_car::{GOAL_POSITION, MAX_POSITION, MIN_POSITION};
use rdd_core::envs::{fraction_at_least, occupied_bins, xpos_density};
use serde::Serialize;

use crate::commands::train::{run_train, SeedRun};
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::output::{ser_exact_vec, ser_sig9, write_table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub run_id: String,
    pub seed: u64,
    pub bonus: String,
    pub window: usize,
    pub window_end_step: u64,
    pub occupied_bins: usize,
    #[serde(serialize_with = "ser_sig9")]
    pub goal_mass: f64,
    /// Bin masses, semicolon-separated, summing to one.
    #[serde(serialize_with = "ser_exact_vec")]
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRun {
    pub run: SeedRun,
    pub bonus: String,
    pub histograms: Vec<Vec<f64>>,
    pub occupied: Vec<usize>,
    pub goal_mass: Vec<f64>,
}

/// Histograms over full windows only; the overshoot of the last update
/// phase past the step budget is dropped.
pub fn window_histograms(
    positions: &[f64],
    bins: usize,
    window: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let w = window as usize;
    let full = positions.len() / w * w;
    if full == 0 {
        return Err(HarnessError::Usage(format!(
            "field `window`: {window} exceeds the {} recorded steps",
            positions.len()
        )));
    }
    let kept = &positions[..full];
    let hist = xpos_density(kept, bins, w, MIN_POSITION, MAX_POSITION)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    let goal =
        fraction_at_least(kept, w, GOAL_POSITION).map_err(|e| HarnessError::Run(e.to_string()))?;
    Ok((hist, goal))
}

pub fn run_density(cfg: &ExperimentConfig) -> Result<Vec<DensityRun>> {
    let mut cfg = cfg.clone();
    cfg.resolve();
    cfg.validate()?;
    let mut out = Vec::new();
    for &bonus in &cfg.bonuses {
        let mut c = cfg.clone();
        c.bonus = bonus;
        for run in run_train(&c)? {
            let (histograms, goal_mass) = window_histograms(&run.positions, c.bins, c.window)?;
            out.push(DensityRun {
                occupied: histograms.iter().map(|h| occupied_bins(h)).collect(),
                bonus: bonus.to_string(),
                histograms,
                goal_mass,
                run,
            });
        }
    }
    let rows: Vec<DensityRow> = out
        .iter()
        .flat_map(|d| {
            d.histograms
                .iter()
                .enumerate()
                .map(move |(i, h)| DensityRow {
                    run_id: d.run.run_id.clone(),
                    seed: d.run.seed,
                    bonus: d.bonus.clone(),
                    window: i,
                    window_end_step: (i as u64 + 1) * cfg.window,
                    occupied_bins: d.occupied[i],
                    goal_mass: d.goal_mass[i],
                    histogram: h.clone(),
                })
        })
        .collect();
    write_table(&cfg.out, "density", cfg.format, &rows)?;
    Ok(out)
}

pub fn report(runs: &[DensityRun]) {
    for d in runs {
        let (first, last) = (d.occupied.first(), d.occupied.last());
        println!(
            "{} windows={} occupied_first={} occupied_final={} goal_mass_first={:.6} goal_mass_final={:.6}",
            d.run.run_id,
            d.histograms.len(),
            first.copied().unwrap_or(0),
            last.copied().unwrap_or(0),
            d.goal_mass.first().copied().unwrap_or(0.0),
            d.goal_mass.last().copied().unwrap_or(0.0),
        );
    }
}
