//! Per-episode metrics rows.

use serde::Serialize;

use rdd_core::agents::EpisodeStats;

use crate::output::{ser_sig9, ser_sig9_vec};

pub const METRICS_SCHEMA: &str = "metrics/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

/// One row per finished episode. Training rows are strictly increasing in
/// `global_step`; evaluation rows go to their own file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub phase: Phase,
    pub global_step: u64,
    pub episode_index: u64,
    #[serde(serialize_with = "ser_sig9")]
    pub episode_return_ext: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub mean_bonus: f64,
    /// Semicolon-separated, empty when no probes are configured.
    #[serde(serialize_with = "ser_sig9_vec")]
    pub bonus_for_probe_states: Vec<f64>,
    pub visited_state_count: u64,
    pub wall_ms: u64,
}

impl MetricsRow {
    pub fn train(run_id: &str, seed: u64, stats: &EpisodeStats, wall_ms: u64) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            phase: Phase::Train,
            global_step: stats.global_step,
            episode_index: stats.episode_index,
            episode_return_ext: stats.return_ext,
            mean_bonus: stats.mean_bonus,
            bonus_for_probe_states: stats.probe_bonuses.clone(),
            visited_state_count: stats.visited_states as u64,
            wall_ms,
        }
    }
}
