use rdd_core::agents::{
    run_ppo, run_qlearning, PpoAgent, PpoConfig, PpoRunConfig, QConfig, QRunConfig, QTable,
    TrainSchedule,
};
use rdd_core::bonus::{RddConfig, RddEstimator, TargetSpec};
use rdd_core::envs::{ChainEnv, Env, FeatureMode, MountainCarEnv};
use rdd_core::BonusEstimator;

fn rdd(input: usize) -> RddEstimator<f64> {
    let mut cfg = RddConfig::new(
        input,
        TargetSpec {
            d: 8,
            seed: 2,
            ..TargetSpec::default()
        },
    );
    cfg.hidden = vec![16];
    cfg.minibatch = 1;
    RddEstimator::new(cfg).unwrap()
}

fn chain_run(
    bonus: Option<&mut (dyn BonusEstimator<f64> + 'static)>,
    lambda: f64,
) -> (QTable, u64) {
    let mut env = ChainEnv::new(10, FeatureMode::OneHot).unwrap();
    let mut table = QTable::new(
        10,
        2,
        QConfig {
            lambda,
            ..QConfig::default()
        },
    );
    let cfg = QRunConfig {
        episodes: 60,
        seed: 4,
        schedule: TrainSchedule::EveryStep,
        probe_states: Vec::new(),
        stop_at_first_success: false,
    };
    let summary = run_qlearning(&mut env, &mut table, bonus, &cfg, |_, _| {}).unwrap();
    (table, summary.global_steps)
}

#[test]
fn zero_lambda_matches_no_bonus_tabular() {
    let mut est = rdd(10);
    let (with, steps_with) = chain_run(Some(&mut est), 0.0);
    let (without, steps_without) = chain_run(None, 0.0);
    assert_eq!(steps_with, steps_without);
    for s in 0..10 {
        for a in 0..2 {
            assert_eq!(with.get(s, a).to_bits(), without.get(s, a).to_bits());
        }
    }
}

#[test]
fn positive_lambda_changes_the_table() {
    let mut est = rdd(10);
    let (with, _) = chain_run(Some(&mut est), 1.0);
    let (without, _) = chain_run(None, 1.0);
    assert!((0..10).any(|s| with.row(s) != without.row(s)));
}

fn ppo_run(
    bonus: Option<&mut (dyn BonusEstimator<f64> + 'static)>,
    beta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let cfg = PpoConfig {
        beta,
        n_envs: 2,
        rollout_len: 64,
        minibatch: 32,
        hidden: vec![16],
        ..PpoConfig::default()
    };
    let mut envs: Vec<Box<dyn Env>> = (0..2)
        .map(|_| Box::new(MountainCarEnv::default()) as Box<dyn Env>)
        .collect();
    let mut agent = PpoAgent::new(2, 3, cfg, 6);
    let run = PpoRunConfig {
        total_steps: 512,
        seed: 6,
        probe_states: Vec::new(),
    };
    let out = run_ppo(&mut envs, &mut agent, bonus, &run, |_, _| {}).unwrap();
    (agent.policy().params_flat(), out.positions)
}

#[test]
fn zero_beta_matches_no_bonus_ppo() {
    let mut est = rdd(2);
    let (p_with, x_with) = ppo_run(Some(&mut est), 0.0);
    let (p_without, x_without) = ppo_run(None, 0.0);
    assert_eq!(x_with, x_without);
    assert!(p_with
        .iter()
        .zip(&p_without)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn runs_are_reproducible() {
    let (mut a, mut b) = (rdd(2), rdd(2));
    assert_eq!(ppo_run(Some(&mut a), 1.0), ppo_run(Some(&mut b), 1.0));
}
