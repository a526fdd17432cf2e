//! `verify-stats`: Monte Carlo check of the visitation statistics against
//! their closed forms.

use rdd_core::bonus::statistics::{closed_form_var_y, closed_form_var_z, concentration_epsilon};
use rdd_core::bonus::{y_statistic_population_vec, z_statistic};
use rdd_core::Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::mc::{mc_oracle_many, McEstimate};
use crate::output::{ser_sig9, write_table};

/// Relative variance tolerances; widened to four standard errors when the
/// trial count is too small to resolve them.
pub const VAR_Z_TOL: f64 = 0.03;
pub const VAR_Y_TOL: f64 = 0.05;
pub const MEAN_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub n: u64,
    pub d: usize,
    #[serde(serialize_with = "ser_sig9")]
    pub mu: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub sigma: f64,
    pub trials: u64,
    #[serde(serialize_with = "ser_sig9")]
    pub mean_z: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub se_mean_z: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub closed_mean: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub mean_gap_se: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub var_z: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub closed_var_z: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub var_z_gap_rel: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub mean_y: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub se_mean_y: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub var_y: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub closed_var_y: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub var_y_gap_rel: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub delta: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub epsilon: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub exceedance: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub exceedance_bound: f64,
    pub pass: bool,
}

/// MC estimates for one `(n, d, mu)` cell: z, y, and one exceedance rate per delta.
#[derive(Debug, Clone, PartialEq)]
pub struct CellEstimate {
    pub z: McEstimate,
    pub y: McEstimate,
    /// Variance via the known mean: E[(z - 1/n)^2], with its standard error.
    pub z_dev: McEstimate,
    pub y_dev: McEstimate,
    pub exceed: Vec<McEstimate>,
    pub epsilons: Vec<f64>,
}

/// Running mean of `n` draws of `N(mu 1_d, sigma^2 I)`.
pub fn sample_mean(rng: &mut Rng, n: u64, d: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    for _ in 0..n {
        acc.iter_mut().for_each(|a| *a += mu + sigma * rng.normal());
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    acc
}

pub fn estimate_cell(
    n: u64,
    d: usize,
    mu: f64,
    sigma: f64,
    deltas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<CellEstimate> {
    let epsilons = deltas
        .iter()
        .map(|&dl| concentration_epsilon(n, dl))
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| HarnessError::Usage(e.to_string()))?;
    let target = 1.0 / n as f64;
    let eps = epsilons.clone();
    let est = mc_oracle_many(
        |rng| sample_mean(rng, n, d, mu, sigma),
        |m| {
            let z = z_statistic(m, mu, sigma).unwrap_or(f64::NAN);
            let y = y_statistic_population_vec(m, mu, sigma).unwrap_or(f64::NAN);
            let mut v = vec![z, y, (z - target).powi(2), (y - target).powi(2)];
            v.extend(
                eps.iter()
                    .map(|e| f64::from(u8::from((z - target).abs() >= *e))),
            );
            v
        },
        trials,
        seed,
    )?;
    Ok(CellEstimate {
        z: est[0],
        y: est[1],
        z_dev: est[2],
        y_dev: est[3],
        exceed: est[4..].to_vec(),
        epsilons,
    })
}

fn rel_gap(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference
}

/// Relative variance check that tolerates four standard errors of the estimate.
fn var_ok(dev: &McEstimate, closed: f64, tol: f64) -> bool {
    (dev.mean - closed).abs() <= (tol * closed).max(4.0 * dev.se)
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<Vec<VerifyRow>> {
    cfg.validate()?;
    if cfg.trials < 1000 {
        eprintln!(
            "warning: {} trials is below 1000; tolerances will be loose",
            cfg.trials
        );
    }
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    let mut cell_index = 0u64;
    for &n in &cfg.ns {
        for &d in &cfg.dims {
            for &mu in &cfg.mus {
                let cell = estimate_cell(
                    n,
                    d,
                    mu,
                    cfg.sigma,
                    &cfg.deltas,
                    cfg.trials,
                    Rng::derive_seed(seed, cell_index),
                )?;
                cell_index += 1;
                let closed_mean = 1.0 / n as f64;
                let closed_var_z = closed_form_var_z::<f64>(n).map_err(run_err)? / d as f64;
                let closed_var_y =
                    closed_form_var_y::<f64>(n, mu, cfg.sigma).map_err(run_err)? / d as f64;
                let mean_gap_se =
                    (cell.z.mean - closed_mean).abs() / cell.z.se.max(f64::MIN_POSITIVE);
                let ordering_ok = mu == 0.0 || cell.y.var >= cell.z.var;
                let stats_ok = mean_gap_se <= MEAN_SE
                    && var_ok(&cell.z_dev, closed_var_z, VAR_Z_TOL)
                    && var_ok(&cell.y_dev, closed_var_y, VAR_Y_TOL)
                    && ordering_ok;
                for (k, &delta) in cfg.deltas.iter().enumerate() {
                    let exceedance = cell.exceed[k].mean;
                    rows.push(VerifyRow {
                        n,
                        d,
                        mu,
                        sigma: cfg.sigma,
                        trials: cfg.trials,
                        mean_z: cell.z.mean,
                        se_mean_z: cell.z.se,
                        closed_mean,
                        mean_gap_se,
                        var_z: cell.z.var,
                        closed_var_z,
                        var_z_gap_rel: rel_gap(cell.z.var, closed_var_z),
                        mean_y: cell.y.mean,
                        se_mean_y: cell.y.se,
                        var_y: cell.y.var,
                        closed_var_y,
                        var_y_gap_rel: rel_gap(cell.y.var, closed_var_y),
                        delta,
                        epsilon: cell.epsilons[k],
                        exceedance,
                        exceedance_bound: 2.0 * delta,
                        pass: stats_ok && exceedance <= 2.0 * delta,
                    });
                }
            }
        }
    }
    write_table(&cfg.out, "verify_stats", cfg.format, &rows)?;
    Ok(rows)
}

fn run_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Run(e.to_string())
}

pub fn report(rows: &[VerifyRow]) {
    for r in rows {
        println!(
            "n={} d={} mu={} delta={} mean_z={:.6} var_z={:.6e} (closed {:.6e}) var_y={:.6e} (closed {:.6e}) exceed={:.5} <= {:.2} {}",
            r.n,
            r.d,
            r.mu,
            r.delta,
            r.mean_z,
            r.var_z,
            r.closed_var_z,
            r.var_y,
            r.closed_var_y,
            r.exceedance,
            r.exceedance_bound,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
}
