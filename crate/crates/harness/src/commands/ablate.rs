//! `ablate`: sweep one target parameter and summarise final returns.

use rdd_core::BonusEstimator;
use serde::Serialize;

use crate::commands::train::{run_train, SeedRun};
use crate::config::{AblateParam, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::output::{ser_sig9, write_table};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub param: String,
    #[serde(serialize_with = "ser_sig9")]
    pub value: f64,
    pub seeds: usize,
    #[serde(serialize_with = "ser_sig9")]
    pub final_return_median: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub final_return_q1: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub final_return_q3: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub final_return_iqr: f64,
    /// Bonus at the first probe state before training, averaged over seeds.
    #[serde(serialize_with = "ser_sig9")]
    pub cold_start_probe_bonus: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub success_rate: f64,
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Bonus an untrained estimator assigns to `probe`.
pub fn cold_start_bonus(est: &mut dyn BonusEstimator<f64>, probe: &[f64]) -> Result<f64> {
    Ok(est.bonus(probe)?)
}

pub fn with_param(cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match cfg.param {
        AblateParam::Mu => c.mu = value,
        AblateParam::Sigma => c.sigma = value,
        AblateParam::Dim => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(HarnessError::Usage(format!(
                    "field `values`: dim must be a positive integer, got {value}"
                )));
            }
            c.dim = value as usize;
        }
    }
    c.out = cfg.out.join(format!("{}={value}", cfg.param));
    Ok(c)
}

pub fn summarise(cfg: &ExperimentConfig, value: f64, runs: &[SeedRun]) -> AblationRow {
    let finals: Vec<f64> = runs.iter().map(SeedRun::final_return).collect();
    let colds: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.cold_probe.first().copied())
        .collect();
    let (q1, q3) = (quantile(&finals, 0.25), quantile(&finals, 0.75));
    AblationRow {
        param: cfg.param.to_string(),
        value,
        seeds: runs.len(),
        final_return_median: quantile(&finals, 0.5),
        final_return_q1: q1,
        final_return_q3: q3,
        final_return_iqr: q3 - q1,
        cold_start_probe_bonus: if colds.is_empty() {
            0.0
        } else {
            colds.iter().sum::<f64>() / colds.len() as f64
        },
        success_rate: runs.iter().filter(|r| r.summary.successes > 0).count() as f64
            / runs.len().max(1) as f64,
    }
}

pub fn run_ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let mut cfg = cfg.clone();
    cfg.resolve();
    cfg.validate()?;
    let mut rows = Vec::new();
    for &value in &cfg.values {
        let c = with_param(&cfg, value)?;
        c.validate()?;
        rows.push(summarise(&cfg, value, &run_train(&c)?));
    }
    write_table(&cfg.out, "ablation", cfg.format, &rows)?;
    Ok(rows)
}

pub fn report(rows: &[AblationRow]) {
    for r in rows {
        println!(
            "{}={} seeds={} final_return_median={:.6} iqr={:.6} cold_start_probe_bonus={:.6} success_rate={:.3}",
            r.param, r.value, r.seeds, r.final_return_median, r.final_return_iqr, r.cold_start_probe_bonus, r.success_rate
        );
    }
}
