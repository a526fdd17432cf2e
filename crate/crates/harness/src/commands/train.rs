//! `train`: one agent/estimator pairing per seed, streamed to disk.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rdd_core::agents::{
    ppo, qlearn, run_ppo, run_qlearning, EpisodeStats, PpoAgent, PpoConfig, PpoRunConfig, QConfig,
    QRunConfig, QTable, RunSummary,
};
use rdd_core::envs::Env;
use rdd_core::Rng;

use crate::calibrate::{calibrate, Calibration};
use crate::config::{AgentKind, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::manifest::RunManifest;
use crate::metrics::{MetricsRow, Phase};
use crate::output::RowSink;
use crate::pool::pool;
use crate::setup::{build_env, build_estimator, probe_states};

/// Everything a finished seed reports back to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub run_id: String,
    pub seed: u64,
    pub summary: RunSummary,
    /// Extrinsic return of every training episode, in order.
    pub returns: Vec<f64>,
    /// Post-step positions in global-step order (PPO on positional envs).
    pub positions: Vec<f64>,
    /// Probe-state bonuses before any training.
    pub cold_probe: Vec<f64>,
    pub manifest: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

impl SeedRun {
    /// Mean extrinsic return over the last tenth of the episodes.
    pub fn final_return(&self) -> f64 {
        let k = (self.returns.len() / 10).max(1).min(self.returns.len());
        if k == 0 {
            return 0.0;
        }
        self.returns[self.returns.len() - k..].iter().sum::<f64>() / k as f64
    }
}

/// How a seed is executed beyond what the config says.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMode {
    /// Skip all files; used by pilot runs.
    pub dry: bool,
    pub stop_at_first_success: bool,
    pub notes: Vec<(String, String)>,
    pub deviations: Vec<String>,
}

pub fn run_id(cfg: &ExperimentConfig, seed: u64) -> String {
    format!(
        "{}-{}-{}-{}-s{seed}",
        cfg.command.name(),
        cfg.env,
        cfg.agent,
        cfg.bonus
    )
}

/// Fixed departures from the reference setup, recorded in every manifest.
pub fn standing_deviations(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.agent == AgentKind::QLearn {
        out.push("tabular Q-learning bootstraps through horizon truncation; only reaching the goal is terminal".into());
    }
    if cfg.agent == AgentKind::Ppo {
        out.push("PPO treats horizon truncation as terminal".into());
    }
    out
}

/// Trains every configured seed on the worker pool, calibrating the episode
/// budget first when asked.
pub fn run_train(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let mut cfg = cfg.clone();
    cfg.resolve();
    cfg.validate()?;
    let mut mode = RunMode {
        deviations: standing_deviations(&cfg),
        ..RunMode::default()
    };
    if cfg.calibrate {
        if cfg.agent != AgentKind::QLearn {
            return Err(HarnessError::Usage(
                "field `calibrate`: pilot calibration needs agent = qlearn".into(),
            ));
        }
        let cal = calibrate(&cfg)?;
        apply_budget(&mut cfg, &mut mode, &cal);
    } else if cfg.budget > 0 {
        cfg.episodes = cfg.budget;
        mode.notes
            .push(("budget_episodes".into(), cfg.budget.to_string()));
    }
    let seeds = cfg.seeds.clone();
    pool()?.install(|| {
        seeds
            .par_iter()
            .map(|&s| train_seed(&cfg, s, &mode))
            .collect()
    })
}

pub fn apply_budget(cfg: &mut ExperimentConfig, mode: &mut RunMode, cal: &Calibration) {
    cfg.episodes = cal.budget;
    cfg.budget = cal.budget;
    mode.notes.extend(cal.notes());
    if cal.quantile.is_none() {
        mode.deviations.push(format!(
            "fewer than 80% of pilot seeds succeeded within {} episodes; budget falls back to the pilot cap",
            cfg.pilot_cap
        ));
    }
}

struct Sinks {
    metrics: RowSink,
    eval: RowSink,
}

/// One seed of a resolved, validated config.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, mode: &RunMode) -> Result<SeedRun> {
    let id = run_id(cfg, seed);
    let env = build_env(cfg)?;
    let mut estimator = build_estimator(cfg, env.obs_dim(), seed)?;
    let probes = probe_states(cfg)?;
    let cold_probe = match estimator.as_deref_mut() {
        Some(est) => probes
            .iter()
            .map(|p| est.bonus(p))
            .collect::<std::result::Result<_, _>>()?,
        None => Vec::new(),
    };

    let mut run = SeedRun {
        run_id: id.clone(),
        seed,
        summary: RunSummary::default(),
        returns: Vec::new(),
        positions: Vec::new(),
        cold_probe,
        manifest: None,
        metrics: None,
        eval: None,
    };
    let mut sinks = if mode.dry {
        None
    } else {
        Some(open_outputs(cfg, seed, mode, &mut run)?)
    };

    let started = Instant::now();
    let wall_ms = || {
        if cfg.wall_clock {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let mut eval_env = build_env(cfg)?;
    let mut failure: Option<HarnessError> = None;
    let mut returns = Vec::new();
    let mut eval_index = 0u64;

    // Streams one training row and, on schedule, one greedy evaluation row.
    let mut record =
        |stats: &EpisodeStats, greedy: &mut dyn FnMut(&mut dyn Env, u64) -> Result<f64>| {
            returns.push(stats.return_ext);
            if failure.is_some() {
                return;
            }
            if !stats.mean_bonus.is_finite() || stats.probe_bonuses.iter().any(|b| !b.is_finite()) {
                failure = Some(HarnessError::Run(format!(
                    "non-finite bonus in episode {}",
                    stats.episode_index
                )));
                return;
            }
            let Some(s) = sinks.as_mut() else { return };
            let mut step = || -> Result<()> {
                s.metrics
                    .write(&MetricsRow::train(&id, seed, stats, wall_ms()))?;
                if cfg.eval_every > 0 && (stats.episode_index + 1).is_multiple_of(cfg.eval_every) {
                    for _ in 0..cfg.eval_episodes {
                        let ret = greedy(
                            eval_env.as_mut(),
                            Rng::derive_seed(seed, 50_000 + eval_index),
                        )?;
                        s.eval.write(&MetricsRow {
                            phase: Phase::Eval,
                            episode_index: eval_index,
                            episode_return_ext: ret,
                            mean_bonus: 0.0,
                            bonus_for_probe_states: Vec::new(),
                            ..MetricsRow::train(&id, seed, stats, wall_ms())
                        })?;
                        eval_index += 1;
                    }
                }
                Ok(())
            };
            if let Err(e) = step() {
                failure = Some(e);
            }
        };

    match cfg.agent {
        AgentKind::QLearn => {
            let mut env = env;
            let (ns, na) = (env.num_states().ok_or_else(not_tabular)?, env.num_actions());
            let mut table = QTable::new(ns, na, q_config(cfg));
            let qcfg = QRunConfig {
                episodes: cfg.episodes,
                seed,
                schedule: cfg.train_schedule,
                probe_states: probes,
                stop_at_first_success: mode.stop_at_first_success,
            };
            run.summary = run_qlearning(
                env.as_mut(),
                &mut table,
                estimator.as_deref_mut(),
                &qcfg,
                |stats, table| {
                    record(
                        stats,
                        &mut |e, s| Ok(qlearn::greedy_episode(e, table, s)?.0),
                    )
                },
            )?;
        }
        AgentKind::Ppo => {
            let mut envs = (0..cfg.n_envs)
                .map(|_| build_env(cfg))
                .collect::<Result<Vec<_>>>()?;
            let mut agent = PpoAgent::new(env.obs_dim(), env.num_actions(), ppo_config(cfg), seed);
            let pcfg = PpoRunConfig {
                total_steps: cfg.steps,
                seed,
                probe_states: probes,
            };
            let out = run_ppo(
                &mut envs,
                &mut agent,
                estimator.as_deref_mut(),
                &pcfg,
                |stats, agent| record(stats, &mut |e, s| Ok(ppo::greedy_episode(e, agent, s)?.0)),
            )?;
            run.summary = out.summary;
            run.positions = out.positions;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    run.returns = returns;
    Ok(run)
}

fn not_tabular() -> HarnessError {
    HarnessError::Usage("field `agent`: qlearn needs a finite state space (chain or grid)".into())
}

fn open_outputs(
    cfg: &ExperimentConfig,
    seed: u64,
    mode: &RunMode,
    run: &mut SeedRun,
) -> Result<Sinks> {
    let dir: &Path = &cfg.out;
    std::fs::create_dir_all(dir)?;
    let ext = cfg.format.extension();
    let metrics = dir.join(format!("{}.metrics.{ext}", run.run_id));
    let eval = dir.join(format!("{}.eval.{ext}", run.run_id));
    let manifest_path = dir.join(format!("{}.manifest", run.run_id));
    let mut manifest = RunManifest::new(run.run_id.clone(), seed, cfg);
    manifest.outputs = vec![
        ("metrics".into(), metrics.clone()),
        ("eval".into(), eval.clone()),
    ];
    manifest.notes = mode.notes.clone();
    manifest.deviations = mode.deviations.clone();
    manifest.write_new(&manifest_path)?;
    run.manifest = Some(manifest_path);
    run.metrics = Some(metrics.clone());
    run.eval = Some(eval.clone());
    Ok(Sinks {
        metrics: RowSink::create(&metrics, cfg.format)?,
        eval: RowSink::create(&eval, cfg.format)?,
    })
}

pub fn q_config(cfg: &ExperimentConfig) -> QConfig {
    QConfig {
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        lambda: cfg.lambda,
        tau: cfg.tau,
    }
}

pub fn ppo_config(cfg: &ExperimentConfig) -> PpoConfig {
    PpoConfig {
        clip: cfg.clip,
        epochs: cfg.epochs,
        gamma: cfg.gamma,
        gamma_int: cfg.gamma_int,
        gae_lambda: cfg.gae_lambda,
        beta: cfg.lambda,
        n_envs: cfg.n_envs,
        rollout_len: cfg.rollout_len,
        minibatch: cfg.ppo_minibatch,
        lr: cfg.ppo_lr,
        hidden: cfg.ppo_hidden.clone(),
        entropy_coef: cfg.entropy,
    }
}

/// Prints one summary line per seed.
pub fn report(runs: &[SeedRun]) {
    for r in runs {
        println!(
            "{} episodes={} steps={} successes={} first_success={} final_return={:.6}",
            r.run_id,
            r.summary.episodes,
            r.summary.global_steps,
            r.summary.successes,
            r.summary
                .first_success
                .map_or("none".to_string(), |e| e.to_string()),
            r.final_return(),
        );
    }
}
