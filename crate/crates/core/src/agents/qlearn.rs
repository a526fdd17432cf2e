use super::{AgentError, EpisodeStats, RunSummary, TrainSchedule, VisitTracker};
use crate::envs::Env;
use crate::estimator::BonusEstimator;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Bonus scale in `r + lambda * b`.
    pub lambda: f64,
    /// Soft target rate; the tabular learner bootstraps directly and ignores it.
    pub tau: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.99,
            epsilon: 0.05,
            lambda: 1.0,
            tau: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub config: QConfig,
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, config: QConfig) -> Self {
        Self {
            config,
            num_states,
            num_actions,
            q: vec![0.0; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.num_actions + action]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.row(state)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn act(&self, state: usize, rng: &mut Rng) -> usize {
        if rng.uniform() < self.config.epsilon {
            rng.below(self.num_actions)
        } else {
            self.greedy(state)
        }
    }

    /// One bootstrapped update towards `r + lambda * bonus + gamma * max Q(s', .)`.
    pub fn q_update(&mut self, t: &QTransition, bonus: f64) {
        let c = self.config;
        let bootstrap = if t.done {
            0.0
        } else {
            c.gamma * self.max_value(t.next_state)
        };
        let target = t.reward + c.lambda * bonus + bootstrap;
        let idx = t.state * self.num_actions + t.action;
        self.q[idx] += c.alpha * (target - self.q[idx]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QRunConfig {
    pub episodes: u64,
    pub seed: u64,
    pub schedule: TrainSchedule,
    pub probe_states: Vec<Vec<f64>>,
    /// End the run after the first successful episode.
    pub stop_at_first_success: bool,
}

/// Epsilon-greedy Q-learning on a finite environment with an optional bonus.
///
/// Bonuses are read on `s'` before the estimator sees it. Exploration draws
/// come from a private stream, so the bonus path never perturbs actions.
pub fn run_qlearning(
    env: &mut dyn Env,
    table: &mut QTable,
    mut estimator: Option<&mut (dyn BonusEstimator<f64> + 'static)>,
    cfg: &QRunConfig,
    mut on_episode: impl FnMut(&EpisodeStats, &QTable),
) -> Result<RunSummary, AgentError> {
    let n_states = env.num_states().ok_or(AgentError::NotTabular)?;
    if n_states != table.num_states() || env.num_actions() != table.num_actions() {
        return Err(AgentError::Ragged(format!(
            "table is {}x{}, env is {}x{}",
            table.num_states(),
            table.num_actions(),
            n_states,
            env.num_actions()
        )));
    }
    let mut rng = Rng::new(Rng::derive_seed(cfg.seed, 10));
    let mut visits = VisitTracker::default();
    let mut summary = RunSummary::default();
    let mut pending: Vec<Vec<f64>> = Vec::new();
    for episode in 0..cfg.episodes {
        env.reset(Rng::derive_seed(cfg.seed, 1_000 + episode));
        let mut s = env.state_index().ok_or(AgentError::NotTabular)?;
        visits.insert_index(s);
        let (mut ret, mut bonus_sum, mut len, mut success) = (0.0, 0.0, 0usize, false);
        loop {
            let a = table.act(s, &mut rng);
            let step = env.step(a)?;
            let s2 = env.state_index().ok_or(AgentError::NotTabular)?;
            let b = match estimator.as_deref_mut() {
                Some(est) => {
                    let b = est.bonus(&step.obs)?;
                    match cfg.schedule {
                        TrainSchedule::EveryStep => {
                            est.train(std::slice::from_ref(&step.obs))?;
                        }
                        TrainSchedule::EpisodeEnd => pending.push(step.obs.clone()),
                    }
                    b
                }
                None => 0.0,
            };
            table.q_update(
                &QTransition {
                    state: s,
                    action: a,
                    reward: step.reward,
                    next_state: s2,
                    done: step.success,
                },
                b,
            );
            visits.insert_index(s2);
            ret += step.reward;
            bonus_sum += b;
            len += 1;
            success |= step.success;
            summary.global_steps += 1;
            s = s2;
            if step.done {
                break;
            }
        }
        if let Some(est) = estimator.as_deref_mut() {
            if !pending.is_empty() {
                est.train(&pending)?;
                pending.clear();
            }
        }
        let probe_bonuses = match estimator.as_deref_mut() {
            Some(est) => cfg
                .probe_states
                .iter()
                .map(|p| est.bonus(p))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        summary.record(episode, success);
        on_episode(
            &EpisodeStats {
                episode_index: episode,
                global_step: summary.global_steps,
                return_ext: ret,
                mean_bonus: bonus_sum / len as f64,
                length: len,
                success,
                visited_states: visits.len(),
                probe_bonuses,
            },
            table,
        );
    }
    Ok(summary)
}

/// Return and success of one greedy episode.
pub fn greedy_episode(
    env: &mut dyn Env,
    table: &QTable,
    seed: u64,
) -> Result<(f64, bool), AgentError> {
    env.reset(seed);
    let mut ret = 0.0;
    loop {
        let s = env.state_index().ok_or(AgentError::NotTabular)?;
        let step = env.step(table.greedy(s))?;
        ret += step.reward;
        if step.done {
            return Ok((ret, step.success));
        }
    }
}
