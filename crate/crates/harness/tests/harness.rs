use std::fs;
use std::path::Path;

use clap::Parser;
use rdd_core::bonus::{RddConfig, RddEstimator, TargetSpec};
use rdd_harness::cli::{build_config, run, Cli};
use rdd_harness::commands::{ablate, density, toy};
use rdd_harness::config::{Command, ExperimentConfig, ToyMode};
use rdd_harness::manifest::read_entries;
use rdd_harness::mc::mc_oracle;

fn rdd(args: &[&str]) -> i32 {
    run(std::iter::once("rdd").chain(args.iter().copied()))
}

fn config_of(args: &[&str]) -> rdd_harness::Result<ExperimentConfig> {
    let cli = Cli::try_parse_from(std::iter::once("rdd").chain(args.iter().copied())).unwrap();
    build_config(&cli.command)
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> String {
    tmp.path().join(name).display().to_string()
}

const METRICS_HEADER: &str =
    "run_id,seed,phase,global_step,episode_index,episode_return_ext,mean_bonus,\
bonus_for_probe_states,visited_state_count,wall_ms";

#[test]
fn unknown_names_list_the_valid_options() {
    let e = config_of(&["train", "--env", "maze"])
        .unwrap_err()
        .to_string();
    assert!(
        e.contains("`env`") && e.contains("chain, grid, mountaincar"),
        "{e}"
    );
    let e = config_of(&["train", "--agent", "dqn"])
        .unwrap_err()
        .to_string();
    assert!(e.contains("qlearn, ppo"), "{e}");
    let e = config_of(&["train", "--bonus", "icm"])
        .unwrap_err()
        .to_string();
    assert!(e.contains("rdd, rnd, drnd, count, none"), "{e}");
    assert_eq!(rdd(&["train", "--bonus", "icm"]), 1);
    assert_eq!(rdd(&["train", "--no-such-flag"]), 1);
    assert_eq!(rdd(&["--help"]), 0);
}

#[test]
fn flags_win_over_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("exp.cfg");
    fs::write(&path, "# sweep\nmu = 2\ndim = 4\nenv = grid\n").unwrap();
    let cfg = config_of(&["train", "--config", path.to_str().unwrap(), "--mu", "3"]).unwrap();
    assert_eq!(
        (cfg.mu, cfg.dim, cfg.env.to_string().as_str()),
        (3.0, 4, "grid")
    );
    let cfg = config_of(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--set",
        "dim=8",
        "--seeds",
        "2..5",
    ])
    .unwrap();
    assert_eq!((cfg.dim, cfg.seeds.clone()), (8, vec![2, 3, 4]));
}

#[test]
fn validation_names_the_field() {
    let mut cfg = ExperimentConfig::new(Command::Train);
    cfg.alpha = 2.0;
    assert!(cfg.validate().unwrap_err().to_string().contains("`alpha`"));
    let e = config_of(&["train", "--set", "gama=0.9"])
        .unwrap_err()
        .to_string();
    assert!(e.contains("gama"), "{e}");
    let e = config_of(&["train", "--episodes", "many"])
        .unwrap_err()
        .to_string();
    assert!(e.contains("`episodes`"), "{e}");
    let mut cfg = ExperimentConfig::new(Command::Density);
    cfg.env = rdd_core::envs::EnvKind::Chain;
    assert!(cfg.validate().unwrap_err().to_string().contains("`env`"));
}

#[test]
fn config_text_roundtrips() {
    let mut cfg = ExperimentConfig::new(Command::Ablate);
    cfg.resolve();
    cfg.mu = 0.25;
    cfg.values = vec![0.5, 2.0];
    let mut back = ExperimentConfig::new(Command::Ablate);
    back.apply_text(&cfg.to_text()).unwrap();
    assert_eq!(back, cfg);
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .unwrap();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn train_writes_ordered_metrics_and_a_reusable_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out_dir(&tmp, "a");
    let args = [
        "train",
        "--episodes",
        "40",
        "--seeds",
        "0,1",
        "--out",
        &a,
        "--set",
        "eval_every=10",
        "--set",
        "chain_length=12",
    ];
    assert_eq!(rdd(&args), 0);
    let metrics = Path::new(&a).join("train-chain-qlearn-rdd-s1.metrics.csv");
    let (header, rows) = read_csv(&metrics);
    assert_eq!(header, METRICS_HEADER);
    assert_eq!(rows.len(), 40);
    let steps: Vec<u64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(
        steps.windows(2).all(|w| w[0] < w[1]),
        "global_step not strictly increasing"
    );
    assert!(rows
        .iter()
        .all(|r| r[2] == "train" && r[7].split(';').count() == 5));
    let (eval_header, evals) = read_csv(&Path::new(&a).join("train-chain-qlearn-rdd-s1.eval.csv"));
    assert_eq!(eval_header, METRICS_HEADER);
    assert_eq!(evals.len(), 4);

    let manifest = Path::new(&a).join("train-chain-qlearn-rdd-s1.manifest");
    let entries = read_entries(&manifest).unwrap();
    let get = |k: &str| {
        entries
            .iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.clone())
    };
    assert_eq!(
        get("manifest.run_id").as_deref(),
        Some("train-chain-qlearn-rdd-s1")
    );
    assert_eq!(get("seeds").as_deref(), Some("1"));
    assert_eq!(get("chain_length").as_deref(), Some("12"));
    assert!(get("manifest.code_version").is_some());
    assert!(get("manifest.deviation.0").is_some());
    assert!(fs::metadata(&manifest).unwrap().permissions().readonly());

    // The manifest alone reproduces the run.
    let b = out_dir(&tmp, "b");
    assert_eq!(
        rdd(&["train", "--config", manifest.to_str().unwrap(), "--out", &b]),
        0
    );
    let again = fs::read(Path::new(&b).join("train-chain-qlearn-rdd-s1.metrics.csv")).unwrap();
    assert_eq!(again, fs::read(&metrics).unwrap());

    // Manifests are never overwritten.
    assert_eq!(rdd(&args), 1);
}

#[test]
fn json_lines_mirror_the_csv_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "j");
    assert_eq!(
        rdd(&[
            "train",
            "--episodes",
            "5",
            "--bonus",
            "count",
            "--format",
            "json",
            "--out",
            &dir
        ]),
        0
    );
    let text =
        fs::read_to_string(Path::new(&dir).join("train-chain-qlearn-count-s0.metrics.jsonl"))
            .unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    let expected: Vec<&str> = METRICS_HEADER.split(',').collect();
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut sorted = expected.clone();
        sorted.sort_unstable();
        let mut got = keys.clone();
        got.sort_unstable();
        assert_eq!(got, sorted);
    }
}

#[test]
fn non_finite_training_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = out_dir(&tmp, "nf");
    assert_eq!(
        rdd(&[
            "train",
            "--episodes",
            "20",
            "--out",
            &dir,
            "--set",
            "est_lr=1e200"
        ]),
        2
    );
}

#[test]
fn verify_stats_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        rdd(&[
            "verify-stats",
            "--trials",
            "50",
            "--out",
            &out_dir(&tmp, "a")
        ]),
        1
    );
    // With 100 trials some cell misses its tolerance for this seed.
    assert_eq!(
        rdd(&[
            "verify-stats",
            "--trials",
            "100",
            "--seed",
            "0",
            "--out",
            &out_dir(&tmp, "b")
        ]),
        3
    );
    let ok = out_dir(&tmp, "c");
    assert_eq!(
        rdd(&[
            "verify-stats",
            "--trials",
            "20000",
            "--ns",
            "1,5",
            "--out",
            &ok
        ]),
        0
    );
    let (header, rows) = read_csv(&Path::new(&ok).join("verify_stats.csv"));
    assert!(header.starts_with("n,d,mu,sigma,trials,mean_z"));
    assert!(header.ends_with("exceedance,exceedance_bound,pass"));
    assert_eq!(rows.len(), 2 * 2 * 2 * 2);
}

#[test]
fn mc_results_do_not_depend_on_worker_count() {
    let est = |w: &str| {
        std::env::set_var("RDD_WORKERS", w);
        mc_oracle(|r| r.normal().powi(2), |&x| x, 30_000, 5).unwrap()
    };
    let (one, three) = (est("1"), est("3"));
    std::env::remove_var("RDD_WORKERS");
    assert_eq!(one, three);
    assert!((one.mean - 1.0).abs() < 3.0 * one.se);
}

#[test]
fn toy_count_trace_is_reciprocal_visits() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Toy);
    cfg.visits = 4;
    cfg.dim = 4;
    cfg.out = tmp.path().to_path_buf();
    let toy::ToyOutput::Decay { traces, summaries } = toy::run_toy(&cfg).unwrap() else {
        panic!("decay mode expected")
    };
    let at4: Vec<f64> = traces
        .iter()
        .filter(|r| r.trace == "count" && r.visit == 4)
        .map(|r| r.value)
        .collect();
    assert_eq!(at4, vec![0.25; 5]);
    assert_eq!(summaries.len(), 1);
    assert_eq!(traces.len(), 4 * 5 * toy::TRACES.len());
    let (header, _) = read_csv(&tmp.path().join("toy_decay.csv"));
    assert_eq!(header, "seed,point,visit,trace,value");

    cfg.mode = ToyMode::Walk;
    cfg.walk_steps = 30;
    cfg.walk_reps = 2;
    cfg.drnd_ns = vec![4, 8];
    let toy::ToyOutput::Walk { medians, .. } = toy::run_toy(&cfg).unwrap() else {
        panic!("walk mode expected")
    };
    assert_eq!(medians.len(), 3);
    assert!(medians.iter().all(|m| m.mse.is_finite() && m.mse >= 0.0));
}

#[test]
fn cold_start_bonus_of_a_zero_predictor_is_mu_squared() {
    let spec = TargetSpec {
        d: 16,
        ..TargetSpec::default()
    };
    let mut est = RddEstimator::new(RddConfig::new(3, spec)).unwrap();
    let zeros = vec![0.0; est.predictor().param_count()];
    est.predictor_mut().set_params_flat(&zeros).unwrap();
    assert_eq!(
        ablate::cold_start_bonus(&mut est, &[0.1, 0.2, 0.3]).unwrap(),
        1.0
    );
}

#[test]
fn ablate_reports_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Ablate);
    cfg.param = "dim".parse().unwrap();
    cfg.values = vec![2.0, 8.0];
    cfg.seeds = vec![0, 1, 2];
    cfg.episodes = 15;
    cfg.chain_length = 10;
    cfg.out = tmp.path().to_path_buf();
    let rows = ablate::run_ablate(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.seeds == 3 && r.final_return_iqr >= 0.0));
    assert!(tmp.path().join("ablation.csv").exists());
    assert!(tmp
        .path()
        .join("dim=8")
        .join("ablate-chain-qlearn-rdd-s2.manifest")
        .exists());
    cfg.values = vec![1.5];
    assert_eq!(ablate::run_ablate(&cfg).unwrap_err().exit_code(), 1);
}

#[test]
fn density_rows_are_distributions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Command::Density);
    cfg.steps = 4096;
    cfg.window = 1024;
    cfg.dim = 4;
    cfg.out = tmp.path().to_path_buf();
    let runs = density::run_density(&cfg).unwrap();
    assert_eq!(runs.len(), 2);
    for d in &runs {
        assert_eq!(d.histograms.len(), 4);
        for h in &d.histograms {
            assert_eq!(h.len(), 50);
            assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
    let (header, rows) = read_csv(&tmp.path().join("density.csv"));
    assert!(header.ends_with("occupied_bins,goal_mass,histogram"));
    for r in rows {
        let total: f64 = r[7].split(';').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() <= 1e-9, "{total}");
    }
}
