//! `toy`: bonus decay traces on a handful of synthetic points, and the
//! scripted walk comparing visitation trackers.

use rdd_core::baselines::{DrndConfig, DrndEstimator, DrndTargets, RndConfig, RndEstimator};
use rdd_core::bonus::{
    y_statistic_population_vec, z_statistic, MeanMode, RddConfig, RddEstimator, TargetSpec,
};
use rdd_core::{BonusEstimator, Rng};
use serde::Serialize;

use crate::commands::ablate::quantile;
use crate::config::{ExperimentConfig, ToyMode};
use crate::error::{HarnessError, Result};
use crate::output::{ser_sig9, write_table};

pub const TRACES: [&str; 6] = ["count", "z_exact", "z_pred", "y_exact", "y_pred", "rnd"];
const MIXTURE_COMPONENTS: usize = 4;
const MIXTURE_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub seed: u64,
    pub point: usize,
    pub visit: u64,
    pub trace: &'static str,
    #[serde(serialize_with = "ser_sig9")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySummary {
    pub seed: u64,
    /// Largest `|trace - 1/n|` over points and visits.
    #[serde(serialize_with = "ser_sig9")]
    pub max_dev_z_exact: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub max_dev_y_exact: f64,
    /// Spread of the untrained RND bonus across the points.
    #[serde(serialize_with = "ser_sig9")]
    pub rnd_initial_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkRow {
    pub seed: u64,
    pub tracker: String,
    pub n_targets: usize,
    #[serde(serialize_with = "ser_sig9")]
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ToyOutput {
    Decay {
        traces: Vec<TraceRow>,
        summaries: Vec<DecaySummary>,
    },
    Walk {
        rows: Vec<WalkRow>,
        medians: Vec<WalkRow>,
    },
}

/// `k` 2-D points drawn from a seeded mixture of four isotropic Gaussians
/// with centres uniform on `[-1, 1]^2`.
pub fn mixture_points(seed: u64, k: usize) -> Vec<Vec<f64>> {
    let mut rng = Rng::new(seed);
    let centres: Vec<[f64; 2]> = (0..MIXTURE_COMPONENTS)
        .map(|_| [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
        .collect();
    (0..k)
        .map(|_| {
            let c = centres[rng.below(MIXTURE_COMPONENTS)];
            vec![
                c[0] + MIXTURE_SPREAD * rng.normal(),
                c[1] + MIXTURE_SPREAD * rng.normal(),
            ]
        })
        .collect()
}

fn hidden(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.est_hidden.is_empty() {
        vec![64, 64]
    } else {
        cfg.est_hidden.clone()
    }
}

fn stats_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Run(e.to_string())
}

/// Decay traces for one seed. Every visit round presents each point once:
/// exact traces use a fresh target draw per point, the predictor-based
/// estimators take one update on the batch of all points.
pub fn decay_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<TraceRow>, DecaySummary)> {
    let points = mixture_points(Rng::derive_seed(seed, 1), cfg.points);
    let (d, mu, sigma) = (cfg.dim, cfg.mu, cfg.sigma);
    let mut draws = Rng::new(Rng::derive_seed(seed, 2));
    let est_seed = Rng::derive_seed(seed, 3);
    let mut rdd_cfg = RddConfig::new(
        2,
        TargetSpec {
            mean_mode: MeanMode::Constant(mu),
            sigma,
            d,
            seed: est_seed,
        },
    );
    rdd_cfg.hidden = hidden(cfg);
    rdd_cfg.lr = cfg.est_lr;
    rdd_cfg.minibatch = cfg.points;
    let mut rdd = RddEstimator::new(rdd_cfg)?;
    let mut drnd_cfg = DrndConfig::new(2, d, cfg.drnd_n, est_seed);
    drnd_cfg.hidden = hidden(cfg);
    drnd_cfg.targets = DrndTargets::Gaussian {
        mean: mu,
        sigma,
        seed: Rng::derive_seed(est_seed, 4),
    };
    drnd_cfg.lr = cfg.est_lr;
    drnd_cfg.minibatch = cfg.points;
    let mut drnd = DrndEstimator::new(drnd_cfg)?;
    let mut rnd = RndEstimator::new(RndConfig {
        input_dim: 2,
        hidden: hidden(cfg),
        d,
        seed: est_seed,
        lr: cfg.est_lr,
        minibatch: cfg.points,
    })?;

    let initial: Vec<f64> = points
        .iter()
        .map(|p| rnd.bonus(p))
        .collect::<std::result::Result<_, _>>()?;
    let lo = initial.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = initial.iter().copied().fold(0.0, f64::max);

    let mut sums = vec![vec![0.0; d]; points.len()];
    let mut rows = Vec::new();
    let (mut dev_z, mut dev_y) = (0.0f64, 0.0f64);
    for visit in 1..=cfg.visits {
        rdd.train(&points)?;
        drnd.train(&points)?;
        rnd.train(&points)?;
        let inv = 1.0 / visit as f64;
        for (i, p) in points.iter().enumerate() {
            sums[i]
                .iter_mut()
                .for_each(|s| *s += mu + sigma * draws.normal());
            let mean: Vec<f64> = sums[i].iter().map(|s| s * inv).collect();
            let z = z_statistic(&mean, mu, sigma).map_err(stats_err)?;
            let y = y_statistic_population_vec(&mean, mu, sigma).map_err(stats_err)?;
            dev_z = dev_z.max((z - inv).abs());
            dev_y = dev_y.max((y - inv).abs());
            let values = [
                inv,
                z,
                rdd.bonus(p)? / (sigma * sigma),
                y,
                drnd.drnd_y_ratio(p)?,
                rnd.bonus(p)?,
            ];
            for (trace, value) in TRACES.iter().zip(values) {
                rows.push(TraceRow {
                    seed,
                    point: i,
                    visit,
                    trace,
                    value,
                });
            }
        }
    }
    Ok((
        rows,
        DecaySummary {
            seed,
            max_dev_z_exact: dev_z,
            max_dev_y_exact: dev_y,
            rnd_initial_ratio: hi / lo,
        },
    ))
}

/// Ring walk of `steps` moves, one step left or right at a time.
fn ring_walk(rng: &mut Rng, points: usize, steps: u64) -> Vec<usize> {
    let mut at = rng.below(points);
    (0..steps)
        .map(|_| {
            let here = at;
            at = if rng.uniform() < 0.5 {
                (at + 1) % points
            } else {
                (at + points - 1) % points
            };
            here
        })
        .collect()
}

/// Squared error to `1/n` of a running-mean tracker, summed over one walk.
/// `draw(point)` yields one `d`-vector sample; `stat(point, mean)` the tracker.
fn walk_sq_error(
    path: &[usize],
    points: usize,
    d: usize,
    per_step: usize,
    mut draw: impl FnMut(usize) -> Result<Vec<f64>>,
    mut stat: impl FnMut(usize, &[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut sums = vec![vec![0.0; d]; points];
    let mut counts = vec![0u64; points];
    let mut sq = 0.0;
    for &i in path {
        for _ in 0..per_step {
            sums[i].iter_mut().zip(draw(i)?).for_each(|(s, x)| *s += x);
        }
        counts[i] += per_step as u64;
        let n = counts[i] as f64;
        let mean: Vec<f64> = sums[i].iter().map(|s| s / n).collect();
        sq += (stat(i, &mean)? - 1.0 / n).powi(2);
    }
    Ok(sq)
}

/// Mean squared error to `1/n` of the exact-mean RDD `z` tracker and of the
/// DRND `y` tracker for each target count, over the scripted walk.
///
/// Each of `walk_reps` replications walks a ring of points from fresh
/// counts, presenting the current point `samples_per_step` times per step;
/// the MSE averages over all steps of all replications. DRND targets are
/// randomly initialised networks, the first ones shared across target counts.
pub fn walk_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<WalkRow>> {
    let points = mixture_points(Rng::derive_seed(seed, 1), cfg.walk_points);
    let np = points.len();
    let mut path_rng = Rng::new(Rng::derive_seed(seed, 4));
    let paths: Vec<Vec<usize>> = (0..cfg.walk_reps)
        .map(|_| ring_walk(&mut path_rng, np, cfg.walk_steps))
        .collect();
    let total_steps = (cfg.walk_reps as u64 * cfg.walk_steps) as f64;
    let (d, mu, sigma) = (cfg.dim, cfg.mu, cfg.sigma);
    let k = cfg.samples_per_step;
    let mut rows = Vec::new();

    let mut draws = Rng::new(Rng::derive_seed(seed, 2));
    let mut sq = 0.0;
    for path in &paths {
        sq += walk_sq_error(
            path,
            np,
            d,
            k,
            |_| Ok((0..d).map(|_| mu + sigma * draws.normal()).collect()),
            |_, mean| z_statistic(mean, mu, sigma).map_err(stats_err),
        )?;
    }
    rows.push(WalkRow {
        seed,
        tracker: "rdd_z".into(),
        n_targets: 0,
        mse: sq / total_steps,
    });

    let target_seed = Rng::derive_seed(seed, 5);
    for &nt in &cfg.drnd_ns {
        let mut c = DrndConfig::new(2, d, nt, Rng::derive_seed(seed, 6));
        c.targets = DrndTargets::Networks {
            hidden: hidden(cfg),
            seed: target_seed,
        };
        let mut drnd = DrndEstimator::<f64>::new(c)?;
        // Target outputs per point, filled on first visit.
        let mut outputs: Vec<Option<Vec<Vec<f64>>>> = vec![None; np];
        let mut sq = 0.0;
        for path in &paths {
            for &i in path {
                if outputs[i].is_none() {
                    outputs[i] = Some(
                        (0..nt)
                            .map(|t| drnd.target_output(t, &points[i]))
                            .collect::<std::result::Result<_, _>>()?,
                    );
                }
            }
            let picks = std::cell::RefCell::new(&mut drnd);
            sq += walk_sq_error(
                path,
                np,
                d,
                k,
                |i| {
                    let t = picks.borrow_mut().pick_target();
                    Ok(outputs[i].as_ref().expect("filled above")[t].clone())
                },
                |i, mean| Ok(picks.borrow_mut().y_ratio_with(&points[i], mean)?),
            )?;
        }
        rows.push(WalkRow {
            seed,
            tracker: "drnd_y".into(),
            n_targets: nt,
            mse: sq / total_steps,
        });
    }
    Ok(rows)
}

/// Per-tracker medians over seeds, in first-seen tracker order.
pub fn walk_medians(rows: &[WalkRow]) -> Vec<WalkRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let key = (r.tracker.clone(), r.n_targets);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(tracker, n_targets)| {
            let mses: Vec<f64> = rows
                .iter()
                .filter(|r| r.tracker == tracker && r.n_targets == n_targets)
                .map(|r| r.mse)
                .collect();
            WalkRow {
                seed: 0,
                tracker,
                n_targets,
                mse: quantile(&mses, 0.5),
            }
        })
        .collect()
}

/// A trace averaged over seeds, compared with `1/n` at each point and visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedMeanDeviation {
    /// Largest `|mean - 1/n|` over points and visits.
    pub max_dev: f64,
    /// Largest `|mean - 1/n|` in standard errors of the seed mean.
    pub max_gap_se: f64,
}

pub fn seed_mean_deviation(traces: &[TraceRow], trace: &str) -> SeedMeanDeviation {
    let mut cells: std::collections::BTreeMap<(usize, u64), Vec<f64>> = Default::default();
    for r in traces.iter().filter(|r| r.trace == trace) {
        cells.entry((r.point, r.visit)).or_default().push(r.value);
    }
    let mut out = SeedMeanDeviation {
        max_dev: 0.0,
        max_gap_se: 0.0,
    };
    for ((_, visit), xs) in cells {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let dev = (mean - 1.0 / visit as f64).abs();
        out.max_dev = out.max_dev.max(dev);
        if xs.len() > 1 {
            let se = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
            out.max_gap_se = out.max_gap_se.max(dev / se.max(f64::MIN_POSITIVE));
        }
    }
    out
}

pub fn run_toy(cfg: &ExperimentConfig) -> Result<ToyOutput> {
    cfg.validate()?;
    match cfg.mode {
        ToyMode::Decay => {
            let mut traces = Vec::new();
            let mut summaries = Vec::new();
            for &seed in &cfg.seeds {
                let (rows, summary) = decay_seed(cfg, seed)?;
                traces.extend(rows);
                summaries.push(summary);
            }
            write_table(&cfg.out, "toy_decay", cfg.format, &traces)?;
            write_table(&cfg.out, "toy_decay_summary", cfg.format, &summaries)?;
            Ok(ToyOutput::Decay { traces, summaries })
        }
        ToyMode::Walk => {
            let mut rows = Vec::new();
            for &seed in &cfg.seeds {
                rows.extend(walk_seed(cfg, seed)?);
            }
            let medians = walk_medians(&rows);
            write_table(&cfg.out, "toy_walk", cfg.format, &rows)?;
            write_table(&cfg.out, "toy_walk_summary", cfg.format, &medians)?;
            Ok(ToyOutput::Walk { rows, medians })
        }
    }
}

pub fn report(out: &ToyOutput) {
    match out {
        ToyOutput::Decay { traces, summaries } => {
            for s in summaries {
                println!(
                    "seed={} max_dev_z_exact={:.6} max_dev_y_exact={:.6} rnd_initial_ratio={:.6}",
                    s.seed, s.max_dev_z_exact, s.max_dev_y_exact, s.rnd_initial_ratio
                );
            }
            for trace in ["z_exact", "y_exact"] {
                let m = seed_mean_deviation(traces, trace);
                println!(
                    "seed mean {trace}: max_dev={:.6} max_gap={:.2}se",
                    m.max_dev, m.max_gap_se
                );
            }
        }
        ToyOutput::Walk { medians, .. } => {
            for m in medians {
                println!(
                    "tracker={} n_targets={} median_mse={:.6e}",
                    m.tracker, m.n_targets, m.mse
                );
            }
        }
    }
}
