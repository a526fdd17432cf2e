use super::{
    gae, AgentError, EpisodeStats, RunSummary, RunningNormalizer, Trajectory, Transition,
    VisitTracker,
};
use crate::envs::Env;
use crate::estimator::BonusEstimator;
use crate::nn::{adam_step, AdamConfig, AdamState, DenseNet, Gradients};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub gamma: f64,
    pub gamma_int: f64,
    pub gae_lambda: f64,
    /// Weight of the intrinsic advantage stream.
    pub beta: f64,
    pub n_envs: usize,
    pub rollout_len: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub entropy_coef: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.1,
            epochs: 4,
            gamma: 0.99,
            gamma_int: 0.99,
            gae_lambda: 0.95,
            beta: 1.0,
            n_envs: 8,
            rollout_len: 128,
            minibatch: 256,
            lr: 3e-4,
            hidden: vec![64, 64],
            entropy_coef: 0.0,
        }
    }
}

/// Flattened update batch with combined, standardised advantages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PpoBatch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub advantages: Vec<f64>,
    pub returns_ext: Vec<f64>,
    pub returns_int: Vec<f64>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoLosses {
    pub policy: f64,
    pub value_ext: f64,
    pub value_int: f64,
}

#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub config: PpoConfig,
    policy: DenseNet<f64>,
    value_ext: DenseNet<f64>,
    value_int: DenseNet<f64>,
    opt_policy: AdamState<f64>,
    opt_ext: AdamState<f64>,
    opt_int: AdamState<f64>,
    int_norm: RunningNormalizer,
    rng: Rng,
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

impl PpoAgent {
    pub fn new(obs_dim: usize, num_actions: usize, config: PpoConfig, seed: u64) -> Self {
        let policy = DenseNet::mlp(
            obs_dim,
            &config.hidden,
            num_actions,
            Rng::derive_seed(seed, 20),
        );
        let value_ext = DenseNet::mlp(obs_dim, &config.hidden, 1, Rng::derive_seed(seed, 21));
        let value_int = DenseNet::mlp(obs_dim, &config.hidden, 1, Rng::derive_seed(seed, 22));
        let adam = AdamConfig::with_lr(config.lr);
        Self {
            opt_policy: AdamState::new(&policy, adam),
            opt_ext: AdamState::new(&value_ext, adam),
            opt_int: AdamState::new(&value_int, adam),
            policy,
            value_ext,
            value_int,
            int_norm: RunningNormalizer::new(),
            rng: Rng::new(Rng::derive_seed(seed, 23)),
            config,
        }
    }

    pub fn policy(&self) -> &DenseNet<f64> {
        &self.policy
    }

    pub fn intrinsic_normalizer(&self) -> &RunningNormalizer {
        &self.int_norm
    }

    pub fn probs(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(log_softmax(&self.policy.forward(obs)?)
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    pub fn log_probs(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(log_softmax(&self.policy.forward(obs)?))
    }

    /// Samples an action; returns it with its log-probability.
    pub fn act(&mut self, obs: &[f64]) -> Result<(usize, f64), AgentError> {
        let lp = self.log_probs(obs)?;
        let u = self.rng.uniform();
        let mut acc = 0.0;
        let mut action = lp.len() - 1;
        for (a, l) in lp.iter().enumerate() {
            acc += l.exp();
            if u < acc {
                action = a;
                break;
            }
        }
        Ok((action, lp[action]))
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy(&self, obs: &[f64]) -> Result<usize, AgentError> {
        let lp = self.log_probs(obs)?;
        let mut best = 0;
        for a in 1..lp.len() {
            if lp[a] > lp[best] {
                best = a;
            }
        }
        Ok(best)
    }

    pub fn values(&self, obs: &[f64]) -> Result<(f64, f64), AgentError> {
        Ok((
            self.value_ext.forward(obs)?[0],
            self.value_int.forward(obs)?[0],
        ))
    }

    /// Clipped surrogate `mean(min(r A, clip(r) A))` of `policy` against `old`.
    pub fn surrogate(
        policy: &DenseNet<f64>,
        old: &DenseNet<f64>,
        batch: &PpoBatch,
        clip: f64,
    ) -> Result<f64, AgentError> {
        let mut total = 0.0;
        for i in 0..batch.len() {
            let a = batch.actions[i];
            let lp = log_softmax(&policy.forward(&batch.states[i])?)[a];
            let lp_old = log_softmax(&old.forward(&batch.states[i])?)[a];
            let r = (lp - lp_old).exp();
            let adv = batch.advantages[i];
            total += (r * adv).min(r.clamp(1.0 - clip, 1.0 + clip) * adv);
        }
        Ok(total / batch.len() as f64)
    }

    /// Scales raw intrinsic rewards by the running standard deviation after
    /// ingesting them.
    pub fn normalise_intrinsic(&mut self, raw: &[f64]) -> Vec<f64> {
        self.int_norm.update_all(raw);
        raw.iter().map(|&r| self.int_norm.scale(r)).collect()
    }

    /// Turns per-stream trajectories into a batch. `bootstrap` holds
    /// `(V_ext, V_int)` of the state following each stream's last step.
    pub fn build_batch(
        &mut self,
        trajs: &[Trajectory],
        bootstrap: &[(f64, f64)],
    ) -> Result<PpoBatch, AgentError> {
        if trajs.len() != bootstrap.len() {
            return Err(AgentError::Ragged(format!(
                "{} streams, {} bootstrap values",
                trajs.len(),
                bootstrap.len()
            )));
        }
        let raw: Vec<f64> = trajs
            .iter()
            .flat_map(|t| t.rewards_int.iter().copied())
            .collect();
        let scaled = self.normalise_intrinsic(&raw);
        let c = &self.config;
        let mut batch = PpoBatch::default();
        let mut a_int_all = Vec::with_capacity(raw.len());
        let mut offset = 0;
        for (t, &(boot_e, boot_i)) in trajs.iter().zip(bootstrap) {
            t.check()?;
            let n = t.len();
            let mut ve = t.values_ext.clone();
            ve.push(boot_e);
            let mut vi = t.values_int.clone();
            vi.push(boot_i);
            let (a_ext, r_ext) = gae(&t.rewards_ext, &ve, &t.dones, c.gamma, c.gae_lambda)?;
            let (a_int, r_int) = gae(
                &scaled[offset..offset + n],
                &vi,
                &t.dones,
                c.gamma_int,
                c.gae_lambda,
            )?;
            offset += n;
            batch.states.extend(t.states.iter().cloned());
            batch.actions.extend_from_slice(&t.actions);
            batch.advantages.extend(a_ext);
            a_int_all.extend(a_int);
            batch.returns_ext.extend(r_ext);
            batch.returns_int.extend(r_int);
        }
        for (a, ai) in batch.advantages.iter_mut().zip(&a_int_all) {
            *a += c.beta * ai;
        }
        standardise(&mut batch.advantages);
        Ok(batch)
    }

    /// K epochs of clipped-surrogate ascent and value regression against the
    /// parameters as they stood on entry.
    pub fn ppo_update(&mut self, batch: &PpoBatch) -> Result<PpoLosses, AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Ragged("empty update batch".into()));
        }
        let old = self.policy.clone();
        let old_lp: Vec<f64> = batch
            .states
            .iter()
            .zip(&batch.actions)
            .map(|(s, &a)| old.forward(s).map(|z| log_softmax(&z)[a]))
            .collect::<Result<_, _>>()?;
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mb = self.config.minibatch.max(1);
        let (mut sum, mut count) = (PpoLosses::default(), 0usize);
        for _ in 0..self.config.epochs {
            for k in (1..order.len()).rev() {
                order.swap(k, self.rng.below(k + 1));
            }
            for chunk in order.chunks(mb) {
                let l = self.minibatch_step(batch, chunk, &old_lp)?;
                sum.policy += l.policy;
                sum.value_ext += l.value_ext;
                sum.value_int += l.value_int;
                count += 1;
            }
        }
        let n = count.max(1) as f64;
        Ok(PpoLosses {
            policy: sum.policy / n,
            value_ext: sum.value_ext / n,
            value_int: sum.value_int / n,
        })
    }

    fn minibatch_step(
        &mut self,
        batch: &PpoBatch,
        idx: &[usize],
        old_lp: &[f64],
    ) -> Result<PpoLosses, AgentError> {
        let c = &self.config;
        let inv = 1.0 / idx.len() as f64;
        let mut gp = Gradients::zeros_like(&self.policy);
        let mut ge = Gradients::zeros_like(&self.value_ext);
        let mut gi = Gradients::zeros_like(&self.value_int);
        let mut losses = PpoLosses::default();
        for &i in idx {
            let s = &batch.states[i];
            let a = batch.actions[i];
            let adv = batch.advantages[i];
            let trace = self.policy.forward_trace(s)?;
            let lp = log_softmax(trace.output());
            let p: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let r = (lp[a] - old_lp[i]).exp();
            let clipped = r.clamp(1.0 - c.clip, 1.0 + c.clip);
            losses.policy -= (r * adv).min(clipped * adv) * inv;
            let active = if adv >= 0.0 {
                r < 1.0 + c.clip
            } else {
                r > 1.0 - c.clip
            };
            let d_lp = if active { -r * adv * inv } else { 0.0 };
            let entropy: f64 = -p.iter().zip(&lp).map(|(pj, lj)| pj * lj).sum::<f64>();
            let d_logits: Vec<f64> = (0..p.len())
                .map(|j| {
                    let ind = if j == a { 1.0 } else { 0.0 };
                    let d_ent = -p[j] * (lp[j] + entropy);
                    d_lp * (ind - p[j]) - c.entropy_coef * d_ent * inv
                })
                .collect();
            let (g, _) = self.policy.backward(&trace, &d_logits)?;
            gp.add_assign(&g);
            let (le, g) = self.value_ext.backward_mse(s, &[batch.returns_ext[i]])?;
            ge.add_assign(&g);
            losses.value_ext += le * inv;
            let (li, g) = self.value_int.backward_mse(s, &[batch.returns_int[i]])?;
            gi.add_assign(&g);
            losses.value_int += li * inv;
        }
        if !(losses.policy.is_finite()
            && losses.value_ext.is_finite()
            && losses.value_int.is_finite())
        {
            return Err(AgentError::NonFinite(format!("ppo losses {losses:?}")));
        }
        ge.scale(inv);
        gi.scale(inv);
        adam_step(&mut self.policy, &gp, &mut self.opt_policy)?;
        adam_step(&mut self.value_ext, &ge, &mut self.opt_ext)?;
        adam_step(&mut self.value_int, &gi, &mut self.opt_int)?;
        Ok(losses)
    }
}

fn standardise(xs: &mut [f64]) {
    let mut norm = RunningNormalizer::new();
    norm.update_all(xs);
    let (mean, std) = (norm.mean(), norm.std());
    let denom = if std > 1e-8 { std } else { 1.0 };
    xs.iter_mut().for_each(|x| *x = (*x - mean) / denom);
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoRunConfig {
    pub total_steps: u64,
    pub seed: u64,
    pub probe_states: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PpoRunOutput {
    pub summary: RunSummary,
    /// Post-step position of every environment step, in global-step order.
    pub positions: Vec<f64>,
    pub losses: Vec<PpoLosses>,
}

/// PPO over `envs` stepped round-robin, each update phase collecting
/// `rollout_len` steps per environment.
pub fn run_ppo(
    envs: &mut [Box<dyn Env>],
    agent: &mut PpoAgent,
    mut estimator: Option<&mut (dyn BonusEstimator<f64> + 'static)>,
    cfg: &PpoRunConfig,
    mut on_episode: impl FnMut(&EpisodeStats, &PpoAgent),
) -> Result<PpoRunOutput, AgentError> {
    if envs.is_empty() {
        return Err(AgentError::Ragged("no environments".into()));
    }
    let m = envs.len();
    let stream_seeds: Vec<u64> = (0..m)
        .map(|i| Rng::derive_seed(cfg.seed, 100 + i as u64))
        .collect();
    let mut resets = vec![0u64; m];
    let mut obs: Vec<Vec<f64>> = envs
        .iter_mut()
        .zip(&stream_seeds)
        .map(|(e, &s)| e.reset(Rng::derive_seed(s, 0)))
        .collect();
    let mut ep = vec![(0.0f64, 0.0f64, 0usize); m];
    let mut visits = VisitTracker::default();
    let mut out = PpoRunOutput::default();
    let mut episode_index = 0u64;
    while out.summary.global_steps < cfg.total_steps {
        let mut trajs = vec![Trajectory::default(); m];
        let mut next_states = Vec::with_capacity(m * agent.config.rollout_len);
        for _ in 0..agent.config.rollout_len {
            for i in 0..m {
                let (action, log_prob) = agent.act(&obs[i])?;
                let (value_ext, value_int) = agent.values(&obs[i])?;
                let step = envs[i].step(action)?;
                let bonus = match estimator.as_deref_mut() {
                    Some(est) => est.bonus(&step.obs)?,
                    None => 0.0,
                };
                if let Some(p) = envs[i].position() {
                    out.positions.push(p);
                }
                visits.insert_obs(envs[i].state_index(), &step.obs);
                out.summary.global_steps += 1;
                let e = &mut ep[i];
                e.0 += step.reward;
                e.1 += bonus;
                e.2 += 1;
                trajs[i].push(Transition {
                    state: std::mem::take(&mut obs[i]),
                    action,
                    reward_ext: step.reward,
                    reward_int: bonus,
                    done: step.done,
                    log_prob,
                    value_ext,
                    value_int,
                });
                if estimator.is_some() {
                    next_states.push(step.obs.clone());
                }
                obs[i] = step.obs;
                if step.done {
                    out.summary.record(episode_index, step.success);
                    on_episode(
                        &EpisodeStats {
                            episode_index,
                            global_step: out.summary.global_steps,
                            return_ext: e.0,
                            mean_bonus: e.1 / e.2 as f64,
                            length: e.2,
                            success: step.success,
                            visited_states: visits.len(),
                            probe_bonuses: match estimator.as_deref_mut() {
                                Some(est) => cfg
                                    .probe_states
                                    .iter()
                                    .map(|p| est.bonus(p))
                                    .collect::<Result<_, _>>()?,
                                None => Vec::new(),
                            },
                        },
                        agent,
                    );
                    episode_index += 1;
                    *e = (0.0, 0.0, 0);
                    resets[i] += 1;
                    obs[i] = envs[i].reset(Rng::derive_seed(stream_seeds[i], resets[i]));
                }
            }
        }
        if let Some(est) = estimator.as_deref_mut() {
            est.train(&next_states)?;
        }
        let bootstrap: Vec<(f64, f64)> = obs
            .iter()
            .map(|o| agent.values(o))
            .collect::<Result<_, _>>()?;
        let batch = agent.build_batch(&trajs, &bootstrap)?;
        out.losses.push(agent.ppo_update(&batch)?);
    }
    Ok(out)
}

/// Return and success of one greedy episode.
pub fn greedy_episode(
    env: &mut dyn Env,
    agent: &PpoAgent,
    seed: u64,
) -> Result<(f64, bool), AgentError> {
    let mut obs = env.reset(seed);
    let mut ret = 0.0;
    loop {
        let step = env.step(agent.greedy(&obs)?)?;
        ret += step.reward;
        if step.done {
            return Ok((ret, step.success));
        }
        obs = step.obs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit_batch(adv: f64) -> PpoBatch {
        PpoBatch {
            states: vec![vec![1.0]; 4],
            actions: vec![0, 1, 0, 1],
            advantages: vec![adv, -adv, adv, -adv],
            returns_ext: vec![0.0; 4],
            returns_int: vec![0.0; 4],
        }
    }

    #[test]
    fn probabilities_normalised() {
        let agent = PpoAgent::new(3, 4, PpoConfig::default(), 1);
        let p = agent.probs(&[0.3, -2.0, 5.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zero_advantage_leaves_policy() {
        let mut agent = PpoAgent::new(1, 2, PpoConfig::default(), 3);
        let before = agent.policy().clone();
        agent.ppo_update(&bandit_batch(0.0)).unwrap();
        assert_eq!(agent.policy(), &before);
    }

    #[test]
    fn first_surrogate_is_mean_advantage() {
        let agent = PpoAgent::new(1, 2, PpoConfig::default(), 3);
        let batch = bandit_batch(0.7);
        let s = PpoAgent::surrogate(agent.policy(), agent.policy(), &batch, 0.1).unwrap();
        assert_eq!(s, batch.advantages.iter().sum::<f64>() / 4.0);
    }

    #[test]
    fn bandit_prefers_advantaged_action() {
        let mut agent = PpoAgent::new(1, 2, PpoConfig::default(), 5);
        let p0 = agent.probs(&[1.0]).unwrap()[0];
        agent.ppo_update(&bandit_batch(1.0)).unwrap();
        assert!(agent.probs(&[1.0]).unwrap()[0] > p0);
    }

    #[test]
    fn standardise_zero_and_general() {
        let mut z = vec![0.0; 5];
        standardise(&mut z);
        assert_eq!(z, vec![0.0; 5]);
        let mut x = vec![1.0, 2.0, 3.0, 4.0];
        standardise(&mut x);
        assert!(x.iter().sum::<f64>().abs() < 1e-12);
    }
}
