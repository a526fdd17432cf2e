//! Acceptance checks. Each test prints one `criterion N ...: PASS|FAIL` line
//! straight to stdout, so the verdicts show even when output is captured.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rdd_core::agents::{gae, QConfig, QTable, QTransition, RunningNormalizer};
use rdd_core::baselines::{RndConfig, RndEstimator};
use rdd_core::bonus::statistics::concentration_epsilon;
use rdd_core::bonus::{RddConfig, RddEstimator};
use rdd_core::envs::ChainEnv;
use rdd_core::nn::{Activation, DenseNet};
use rdd_core::{BonusEstimator, EstimatorKind, Rng};
use rdd_harness::calibrate::calibrate;
use rdd_harness::commands::train::{apply_budget, standing_deviations, train_seed, RunMode};
use rdd_harness::commands::verify::{estimate_cell, CellEstimate};
use rdd_harness::commands::{density, toy};
use rdd_harness::config::{BonusKind, Command, ExperimentConfig, ToyMode};
use rdd_harness::manifest::read_entries;
use rdd_harness::setup::{probe_states, target_spec};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {id:>2} {name}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn cell(n: u64, d: usize, mu: f64, deltas: &[f64], trials: u64, seed: u64) -> CellEstimate {
    estimate_cell(n, d, mu, 1.0, deltas, trials, seed).unwrap()
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference
}

#[test]
fn c01_z_is_unbiased() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, n) in [1u64, 2, 5, 10, 50].into_iter().enumerate() {
        let c = cell(n, 1, 1.0, &[], 100_000, 100 + i as u64);
        let gap = (c.z.mean - 1.0 / n as f64).abs() / c.z.se;
        pass &= gap <= 3.0;
        detail.push(format!("n={n}:{gap:.2}se"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    detail.push(format!("{:.2}s", elapsed.as_secs_f64()));
    verdict(1, "unbiased z", pass, &detail.join(" "));
}

#[test]
fn c02_c03_variances_match_closed_forms() {
    let mut pass_z = true;
    let mut pass_y = true;
    let (mut dz, mut dy) = (Vec::new(), Vec::new());
    for (i, n) in [1u64, 2, 5, 10].into_iter().enumerate() {
        let nf = n as f64;
        let c = cell(n, 1, 1.0, &[], 1_000_000, 200 + i as u64);
        let gz = rel(c.z.var, 2.0 / (nf * nf));
        let gy = rel(c.y.var, 2.0 / (nf * nf) + 4.0 / nf);
        pass_z &= gz <= 0.03;
        pass_y &= gy <= 0.05 && c.y.var >= c.z.var;
        dz.push(format!("n={n}:{:.2}%", 100.0 * gz));
        dy.push(format!(
            "n={n}:{:.2}% y>=z:{}",
            100.0 * gy,
            c.y.var >= c.z.var
        ));

        // At mu = 0 the two statistics share their variance.
        let c0 = cell(n, 1, 0.0, &[], 100_000, 300 + i as u64);
        let g0 = rel(c0.y.var, c0.z.var);
        pass_y &= g0 <= 0.05 && rel(c0.y.var, 2.0 / (nf * nf)) <= 0.05;
        dy.push(format!("mu0:{:.2}%", 100.0 * g0));
    }
    let z_line = dz.join(" ");
    let y_line = dy.join(" ");
    let (pz, py) = (pass_z, pass_y);
    let report = || {
        let out = std::io::stdout();
        let mut out = out.lock();
        let _ = writeln!(
            out,
            "criterion  2 var z: {} | {z_line}",
            if pz { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(
            out,
            "criterion  3 population y: {} | {y_line}",
            if py { "PASS" } else { "FAIL" }
        );
    };
    report();
    assert!(pass_z, "criterion 2 var z failed: {z_line}");
    assert!(pass_y, "criterion 3 population y failed: {y_line}");
}

#[test]
fn c04_dimension_divides_variance() {
    let one = cell(5, 1, 1.0, &[], 100_000, 400);
    let many = cell(5, 16, 1.0, &[], 100_000, 401);
    let scaled = 16.0 * many.z.var / one.z.var;
    verdict(
        4,
        "dimension reduction",
        (0.9..=1.1).contains(&scaled),
        &format!("16*ratio={scaled:.4}"),
    );
}

#[test]
fn c05_concentration_bound_holds() {
    let deltas = [0.05, 0.1];
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, n) in [5u64, 10, 50].into_iter().enumerate() {
        let c = cell(n, 1, 1.0, &deltas, 100_000, 500 + i as u64);
        for (k, &delta) in deltas.iter().enumerate() {
            let rate = c.exceed[k].mean;
            pass &= rate <= 2.0 * delta;
            detail.push(format!("n={n},d={delta}:{rate:.4}"));
        }
    }
    let eps: f64 = concentration_epsilon(10, 0.1).unwrap();
    pass &= (eps - 0.26133).abs() <= 1e-4;
    detail.push(format!("eps(10,0.1)={eps:.5}"));
    verdict(5, "concentration", pass, &detail.join(" "));
}

#[test]
fn c06_degenerate_rdd_is_rnd() {
    let mut cfg = ExperimentConfig::new(Command::Train);
    cfg.sigma = 0.0;
    cfg.resolve();
    let seed = 3;
    let env = ChainEnv::new(cfg.chain_length, cfg.features).unwrap();
    let input = env.features_of(0).len();
    let spec = target_spec(&cfg, seed);
    let mut rc = RddConfig::new(input, spec);
    rc.hidden = cfg.est_hidden.clone();
    rc.lr = cfg.est_lr;
    rc.minibatch = cfg.est_minibatch;
    let mut rdd = RddEstimator::new(rc).unwrap();
    let mean_net = rdd.target().as_network(input);
    let mut rnd = RndEstimator::with_target(
        RndConfig {
            input_dim: input,
            hidden: cfg.est_hidden.clone(),
            d: cfg.dim,
            seed: spec.seed,
            lr: cfg.est_lr,
            minibatch: cfg.est_minibatch,
        },
        mean_net,
    )
    .unwrap();

    let probes = probe_states(&cfg).unwrap();
    let mut rng = Rng::new(seed);
    let mut pos = 0usize;
    let mut mismatch = None;
    for step in 0..1_000 {
        pos = if rng.below(2) == 1 {
            (pos + 1).min(cfg.chain_length - 1)
        } else {
            pos.saturating_sub(1)
        };
        let batch = [env.features_of(pos)];
        let (a, b) = (rdd.train(&batch).unwrap(), rnd.train(&batch).unwrap());
        if a.to_bits() != b.to_bits() {
            mismatch = Some(format!("loss at step {step}"));
            break;
        }
        let same = probes
            .iter()
            .all(|p| rdd.bonus(p).unwrap().to_bits() == rnd.bonus(p).unwrap().to_bits());
        if !same {
            mismatch = Some(format!("bonus at step {step}"));
            break;
        }
    }
    let detail = mismatch
        .clone()
        .unwrap_or_else(|| "1000 steps bit-identical".into());
    verdict(6, "RND limit", mismatch.is_none(), &detail);
}

#[test]
fn c07_drnd_tracker_approaches_rdd() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Toy);
    cfg.mode = ToyMode::Walk;
    cfg.seeds = (0..20).collect();
    cfg.drnd_ns = vec![10, 100, 1000];
    cfg.out = tmp.path().to_path_buf();
    let toy::ToyOutput::Walk { medians, .. } = toy::run_toy(&cfg).unwrap() else {
        panic!("walk output expected")
    };
    let median = |tracker: &str, n: usize| {
        medians
            .iter()
            .find(|m| m.tracker == tracker && (tracker == "rdd_z" || m.n_targets == n))
            .map(|m| m.mse)
            .unwrap()
    };
    let drnd: Vec<f64> = cfg.drnd_ns.iter().map(|&n| median("drnd_y", n)).collect();
    let rdd = median("rdd_z", 0);
    let elapsed = start.elapsed();
    let pass = drnd.windows(2).all(|w| w[1] <= w[0])
        && drnd[2] <= 2.0 * rdd
        && elapsed < Duration::from_secs(300);
    let detail = format!(
        "drnd N=10,100,1000: {:.3e} {:.3e} {:.3e}; rdd {rdd:.3e}; {:.1}s",
        drnd[0],
        drnd[1],
        drnd[2],
        elapsed.as_secs_f64()
    );
    verdict(7, "DRND limit", pass, &detail);
}

#[test]
fn c08_exact_z_decays_tighter_than_y() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Toy);
    cfg.dim = 256;
    cfg.sigma = 1.0;
    cfg.visits = 50;
    cfg.seeds = (0..10).collect();
    cfg.out = tmp.path().to_path_buf();
    let toy::ToyOutput::Decay { traces, summaries } = toy::run_toy(&cfg).unwrap() else {
        panic!("decay output expected")
    };
    // Traces are seed means per state, as in the Monte Carlo over seeds.
    let z = toy::seed_mean_deviation(&traces, "z_exact");
    let y = toy::seed_mean_deviation(&traces, "y_exact");
    let spread = summaries
        .iter()
        .filter(|s| s.rnd_initial_ratio > 1.0)
        .count();
    let pass = summaries.len() == 10 && z.max_dev < y.max_dev && spread == 10;
    let detail = format!(
        "max dev z {:.4} ({:.2}se) < y {:.4}; rnd ratio>1 in {spread}/10",
        z.max_dev, z.max_gap_se, y.max_dev
    );
    verdict(8, "decay ordering", pass, &detail);
}

fn note(manifest: &Path, key: &str) -> Option<String> {
    read_entries(manifest)
        .unwrap()
        .into_iter()
        .find(|(k, _)| k == &format!("manifest.note.{key}"))
        .map(|(_, v)| v)
}

#[test]
fn c09_bonuses_solve_the_chain() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut base = ExperimentConfig::new(Command::Train);
    base.chain_length = 40;
    base.seeds = (0..5).collect();
    base.resolve();
    base.validate().unwrap();

    let mut successes = Vec::new();
    let mut budgets = Vec::new();
    let mut recorded = true;
    let mut run_arm = |bonus: BonusKind, budget: Option<u64>| -> (u64, usize) {
        let mut cfg = base.clone();
        cfg.bonus = bonus;
        cfg.out = tmp.path().join(bonus.to_string());
        std::fs::create_dir_all(&cfg.out).unwrap();
        let mut mode = RunMode {
            deviations: standing_deviations(&cfg),
            ..RunMode::default()
        };
        match budget {
            None => {
                let cal = calibrate(&cfg).unwrap();
                apply_budget(&mut cfg, &mut mode, &cal);
            }
            Some(b) => {
                cfg.episodes = b;
                cfg.budget = b;
                mode.notes.push(("budget_episodes".into(), b.to_string()));
            }
        }
        let mut ok = 0;
        for &seed in &cfg.seeds {
            let run = train_seed(&cfg, seed, &mode).unwrap();
            ok += usize::from(run.summary.first_success.is_some());
            recorded &= note(run.manifest.as_deref().unwrap(), "budget_episodes")
                == Some(cfg.budget.to_string());
        }
        (cfg.budget, ok)
    };
    for kind in [EstimatorKind::Rdd, EstimatorKind::Count] {
        let (budget, ok) = run_arm(BonusKind::Estimator(kind), None);
        budgets.push(budget);
        successes.push(ok);
    }
    let none_budget = *budgets.iter().max().unwrap();
    let (_, none_ok) = run_arm(BonusKind::None, Some(none_budget));
    let elapsed = start.elapsed();
    let pass = none_ok <= 1
        && successes.iter().all(|&s| s >= 4)
        && recorded
        && elapsed < Duration::from_secs(600);
    let detail = format!(
        "rdd {}/5 in {} eps, count {}/5 in {} eps, none {none_ok}/5 in {none_budget} eps; budgets in manifests: {recorded}; {:.0}s",
        successes[0],
        budgets[0],
        successes[1],
        budgets[1],
        elapsed.as_secs_f64()
    );
    verdict(9, "chain exploration", pass, &detail);
}

#[test]
fn c10_rdd_spreads_mountain_car_occupancy() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Density);
    cfg.seeds = (0..5).collect();
    cfg.steps = 200_000;
    cfg.window = 20_000;
    cfg.bins = 50;
    cfg.out = tmp.path().to_path_buf();
    let runs = density::run_density(&cfg).unwrap();
    let arm = |bonus: &str| -> Vec<&density::DensityRun> {
        runs.iter().filter(|r| r.bonus == bonus).collect()
    };
    let (rdd, none) = (arm("rdd"), arm("none"));
    let wins = rdd
        .iter()
        .zip(&none)
        .filter(|(r, n)| r.occupied.last() >= n.occupied.last())
        .count();
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
    let first = mean(rdd.iter().map(|r| r.goal_mass[0]).collect());
    let last = mean(rdd.iter().map(|r| *r.goal_mass.last().unwrap()).collect());
    let elapsed = start.elapsed();
    let pass = rdd.len() == 5 && wins >= 3 && last > first && elapsed < Duration::from_secs(1800);
    let occ = |rs: &[&density::DensityRun]| {
        rs.iter()
            .map(|r| r.occupied.last().unwrap().to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let detail = format!(
        "final-window bins rdd [{}] none [{}], rdd>=none in {wins}/5; rdd goal mass {first:.4} -> {last:.4}; {:.0}s",
        occ(&rdd),
        occ(&none),
        elapsed.as_secs_f64()
    );
    verdict(10, "MountainCar occupancy", pass, &detail);
}

fn fd_gradient_error(act: Activation, seed: u64) -> f64 {
    let net = DenseNet::<f64>::with_activations(5, &[16, 16], 4, act, Activation::Identity, seed);
    let x = [0.4, -0.7, 0.1, 0.9, -0.3];
    let target = [1.0, -1.0, 0.5, 0.0];
    let (_, grads) = net.backward_mse(&x, &target).unwrap();
    let base = net.params_flat();
    let loss = |p: &[f64]| {
        let mut n = net.clone();
        n.set_params_flat(p).unwrap();
        n.forward(&x)
            .unwrap()
            .iter()
            .zip(&target)
            .map(|(o, t)| (o - t).powi(2))
            .sum::<f64>()
    };
    let h = 1e-6;
    grads
        .flatten()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let (mut up, mut down) = (base.clone(), base.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            (a - fd).abs() / (a.abs().max(fd.abs()) + 1e-4)
        })
        .fold(0.0, f64::max)
}

fn brute_force_gae(r: &[f64], v: &[f64], done: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    (0..r.len())
        .map(|t| {
            let (mut acc, mut w) = (0.0, 1.0);
            for k in t..r.len() {
                let next = if done[k] { 0.0 } else { gamma * v[k + 1] };
                acc += w * (r[k] + next - v[k]);
                if done[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}

fn gae_error() -> f64 {
    let mut rng = Rng::new(1100);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = 1 + rng.below(60);
        let r: Vec<f64> = (0..t).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let v: Vec<f64> = (0..=t).map(|_| rng.uniform_in(-5.0, 5.0)).collect();
        let done: Vec<bool> = (0..t).map(|_| rng.uniform() < 0.1).collect();
        let (gamma, lambda) = (rng.uniform(), rng.uniform());
        let (adv, ret) = gae(&r, &v, &done, gamma, lambda).unwrap();
        for (k, e) in brute_force_gae(&r, &v, &done, gamma, lambda)
            .iter()
            .enumerate()
        {
            worst = worst.max((adv[k] - e).abs()).max((ret[k] - e - v[k]).abs());
        }
    }
    worst
}

fn normalizer_error() -> f64 {
    let mut rng = Rng::new(1101);
    let xs: Vec<f64> = (0..50_000).map(|_| 1e3 + 20.0 * rng.normal()).collect();
    let mut norm = RunningNormalizer::new();
    norm.update_all(&xs);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (rel(norm.mean(), mean)).max(rel(norm.variance(), var))
}

/// Deterministic three-state MDP; state 2 is absorbing.
const NEXT: [[usize; 2]; 3] = [[0, 1], [0, 2], [2, 2]];
const REWARD: [[f64; 2]; 3] = [[0.0, 0.2], [0.3, 1.0], [0.0, 0.0]];
const TERMINAL: [[bool; 2]; 3] = [[false, false], [false, true], [true, true]];

fn q_learning_error() -> f64 {
    let gamma = 0.95;
    let mut vi = [[0.0f64; 2]; 3];
    for _ in 0..5_000 {
        let prev = vi;
        for s in 0..3 {
            for a in 0..2 {
                let s2 = NEXT[s][a];
                let boot = if TERMINAL[s][a] {
                    0.0
                } else {
                    gamma * prev[s2][0].max(prev[s2][1])
                };
                vi[s][a] = REWARD[s][a] + boot;
            }
        }
    }
    let mut table = QTable::new(
        3,
        2,
        QConfig {
            alpha: 0.3,
            gamma,
            ..QConfig::default()
        },
    );
    for _ in 0..5_000 {
        for s in 0..3 {
            for a in 0..2 {
                let t = QTransition {
                    state: s,
                    action: a,
                    reward: REWARD[s][a],
                    next_state: NEXT[s][a],
                    done: TERMINAL[s][a],
                };
                table.q_update(&t, 0.0);
            }
        }
    }
    (0..3)
        .flat_map(|s| (0..2).map(move |a| (s, a)))
        .map(|(s, a)| (table.get(s, a) - vi[s][a]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn c11_numerics() {
    let grad = fd_gradient_error(Activation::Tanh, 1).max(fd_gradient_error(Activation::Relu, 2));
    let gae_err = gae_error();
    let norm = normalizer_error();
    let q = q_learning_error();
    let pass = grad <= 1e-4 && gae_err <= 1e-12 && norm <= 1e-9 && q <= 1e-6;
    let detail = format!(
        "grad rel {grad:.1e}; gae {gae_err:.1e}; normalizer rel {norm:.1e}; q vs vi {q:.1e}"
    );
    verdict(11, "numerics", pass, &detail);
}
