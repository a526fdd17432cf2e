//! Experiment configuration: `key = value` files overlaid by CLI flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rdd_core::agents::TrainSchedule;
use rdd_core::envs::{EnvKind, FeatureMode};
use rdd_core::EstimatorKind;

use crate::error::{HarnessError, Result};
use crate::output::Format;

/// Keys with this prefix are provenance written by the harness; they are
/// skipped when a manifest is fed back in as a config.
pub const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyStats,
    Toy,
    Train,
    Density,
    Ablate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyStats => "verify-stats",
            Command::Toy => "toy",
            Command::Train => "train",
            Command::Density => "density",
            Command::Ablate => "ablate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    QLearn,
    Ppo,
}

/// Estimator choice including the bonus-free baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BonusKind {
    None,
    Estimator(EstimatorKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyMode {
    Decay,
    Walk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateParam {
    Mu,
    Sigma,
    Dim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanKind {
    Constant,
    Net,
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, $($variant:expr => $name:literal),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                $(if s == $name { return Ok($variant); })+
                Err(format!(concat!("unknown ", $what, " `{}` (valid: {})"), s, [$($name),+].join(", ")))
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

named_enum!(AgentKind, "agent", AgentKind::QLearn => "qlearn", AgentKind::Ppo => "ppo");
named_enum!(
    BonusKind, "bonus",
    BonusKind::Estimator(EstimatorKind::Rdd) => "rdd",
    BonusKind::Estimator(EstimatorKind::Rnd) => "rnd",
    BonusKind::Estimator(EstimatorKind::Drnd) => "drnd",
    BonusKind::Estimator(EstimatorKind::Count) => "count",
    BonusKind::None => "none",
);
named_enum!(ToyMode, "toy mode", ToyMode::Decay => "decay", ToyMode::Walk => "walk");
named_enum!(AblateParam, "ablation parameter", AblateParam::Mu => "mu", AblateParam::Sigma => "sigma", AblateParam::Dim => "dim");
named_enum!(MeanKind, "mean mode", MeanKind::Constant => "constant", MeanKind::Net => "net");

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub format: Format,
    pub wall_clock: bool,

    pub env: EnvKind,
    pub chain_length: usize,
    pub grid_size: usize,
    pub features: FeatureMode,

    pub agent: AgentKind,
    pub episodes: u64,
    pub steps: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Bonus scale: `lambda` for Q-learning, `beta` for PPO.
    pub lambda: f64,
    pub tau: f64,
    pub train_schedule: TrainSchedule,
    pub eval_every: u64,
    pub eval_episodes: u64,

    pub clip: f64,
    pub epochs: usize,
    pub gae_lambda: f64,
    pub gamma_int: f64,
    pub n_envs: usize,
    pub rollout_len: usize,
    pub ppo_minibatch: usize,
    pub ppo_lr: f64,
    pub ppo_hidden: Vec<usize>,
    pub entropy: f64,

    pub bonus: BonusKind,
    pub mean_mode: MeanKind,
    pub mu: f64,
    pub sigma: f64,
    pub dim: usize,
    pub drnd_n: usize,
    pub est_lr: f64,
    pub est_hidden: Vec<usize>,
    pub est_minibatch: usize,
    pub count_sqrt: bool,

    pub trials: u64,
    pub ns: Vec<u64>,
    pub deltas: Vec<f64>,
    pub dims: Vec<usize>,
    pub mus: Vec<f64>,

    pub mode: ToyMode,
    pub visits: u64,
    pub points: usize,
    pub walk_points: usize,
    pub samples_per_step: usize,
    pub walk_steps: u64,
    pub walk_reps: usize,
    pub drnd_ns: Vec<usize>,

    pub bins: usize,
    pub window: u64,
    pub bonuses: Vec<BonusKind>,

    pub param: AblateParam,
    pub values: Vec<f64>,

    pub calibrate: bool,
    pub pilot_seeds: Vec<u64>,
    pub pilot_cap: u64,
    pub budget: u64,
}

fn list<T: FromStr>(field: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| bad(field, s, e)))
        .collect()
}

/// Seed lists accept ranges such as `0..20` alongside comma lists.
fn seed_list(field: &str, v: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| bad(field, v, e))?;
        let b: u64 = b.trim().parse().map_err(|e| bad(field, v, e))?;
        return Ok((a..b).collect());
    }
    list(field, v)
}

fn bad(field: &str, value: &str, why: impl fmt::Display) -> HarnessError {
    HarnessError::Usage(format!("field `{field}`: cannot parse `{value}`: {why}"))
}

fn one<T: FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse().map_err(|e| bad(field, v, e))
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Defaults for `command`; environment-dependent fields are resolved
    /// later by [`ExperimentConfig::resolve`].
    pub fn new(command: Command) -> Self {
        let (env, agent) = match command {
            Command::Density => (EnvKind::MountainCar, AgentKind::Ppo),
            _ => (EnvKind::Chain, AgentKind::QLearn),
        };
        Self {
            command,
            seeds: vec![0],
            out: PathBuf::from("out"),
            format: Format::Csv,
            wall_clock: false,
            env,
            chain_length: 40,
            grid_size: 21,
            features: FeatureMode::OneHot,
            agent,
            episodes: 0,
            steps: 0,
            alpha: 0.5,
            gamma: 0.99,
            epsilon: 0.05,
            lambda: 1.0,
            tau: 0.005,
            train_schedule: TrainSchedule::EveryStep,
            eval_every: 0,
            eval_episodes: 1,
            clip: 0.1,
            epochs: 4,
            gae_lambda: 0.95,
            gamma_int: 0.99,
            n_envs: 8,
            rollout_len: 128,
            ppo_minibatch: 256,
            ppo_lr: 3e-4,
            ppo_hidden: vec![64, 64],
            entropy: 0.0,
            bonus: BonusKind::Estimator(EstimatorKind::Rdd),
            mean_mode: MeanKind::Constant,
            mu: 1.0,
            sigma: 1.0,
            dim: 16,
            drnd_n: 10,
            est_lr: 3e-4,
            est_hidden: Vec::new(),
            est_minibatch: 0,
            count_sqrt: false,
            trials: 100_000,
            ns: vec![1, 2, 5, 10, 50],
            deltas: vec![0.05, 0.1],
            dims: vec![1, 16],
            mus: vec![0.0, 1.0],
            mode: ToyMode::Decay,
            visits: 50,
            points: 5,
            walk_points: 100,
            samples_per_step: 5,
            walk_steps: 200,
            walk_reps: 20,
            drnd_ns: vec![10, 100, 1000],
            bins: 50,
            window: 20_000,
            bonuses: vec![BonusKind::Estimator(EstimatorKind::Rdd), BonusKind::None],
            param: AblateParam::Sigma,
            values: vec![0.1, 1.0],
            calibrate: false,
            pilot_seeds: (1000..1020).collect(),
            pilot_cap: 5000,
            budget: 0,
        }
    }

    /// Parses a `key = value` document on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Usage(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let k = k.trim();
            if k.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        match k {
            "seeds" => self.seeds = seed_list(k, v)?,
            "seed" => self.seeds = vec![one(k, v)?],
            "out" => self.out = PathBuf::from(v),
            "format" => self.format = one(k, v)?,
            "wall_clock" => self.wall_clock = one(k, v)?,
            "env" => self.env = one(k, v)?,
            "chain_length" => self.chain_length = one(k, v)?,
            "grid_size" => self.grid_size = one(k, v)?,
            "features" => self.features = one(k, v)?,
            "agent" => self.agent = one(k, v)?,
            "episodes" => self.episodes = one(k, v)?,
            "steps" => self.steps = one(k, v)?,
            "alpha" => self.alpha = one(k, v)?,
            "gamma" => self.gamma = one(k, v)?,
            "epsilon" => self.epsilon = one(k, v)?,
            "lambda" | "beta" => self.lambda = one(k, v)?,
            "tau" => self.tau = one(k, v)?,
            "train_schedule" => self.train_schedule = one(k, v)?,
            "eval_every" => self.eval_every = one(k, v)?,
            "eval_episodes" => self.eval_episodes = one(k, v)?,
            "clip" => self.clip = one(k, v)?,
            "epochs" => self.epochs = one(k, v)?,
            "gae_lambda" => self.gae_lambda = one(k, v)?,
            "gamma_int" => self.gamma_int = one(k, v)?,
            "n_envs" => self.n_envs = one(k, v)?,
            "rollout_len" => self.rollout_len = one(k, v)?,
            "ppo_minibatch" => self.ppo_minibatch = one(k, v)?,
            "ppo_lr" => self.ppo_lr = one(k, v)?,
            "ppo_hidden" => self.ppo_hidden = list(k, v)?,
            "entropy" => self.entropy = one(k, v)?,
            "bonus" => self.bonus = one(k, v)?,
            "mean_mode" => self.mean_mode = one(k, v)?,
            "mu" => self.mu = one(k, v)?,
            "sigma" => self.sigma = one(k, v)?,
            "dim" => self.dim = one(k, v)?,
            "drnd_n" => self.drnd_n = one(k, v)?,
            "est_lr" => self.est_lr = one(k, v)?,
            "est_hidden" => self.est_hidden = list(k, v)?,
            "est_minibatch" => self.est_minibatch = one(k, v)?,
            "count_sqrt" => self.count_sqrt = one(k, v)?,
            "trials" => self.trials = one(k, v)?,
            "ns" => self.ns = list(k, v)?,
            "deltas" => self.deltas = list(k, v)?,
            "dims" => self.dims = list(k, v)?,
            "mus" => self.mus = list(k, v)?,
            "mode" => self.mode = one(k, v)?,
            "visits" => self.visits = one(k, v)?,
            "points" => self.points = one(k, v)?,
            "walk_points" => self.walk_points = one(k, v)?,
            "samples_per_step" => self.samples_per_step = one(k, v)?,
            "walk_steps" => self.walk_steps = one(k, v)?,
            "walk_reps" => self.walk_reps = one(k, v)?,
            "drnd_ns" => self.drnd_ns = list(k, v)?,
            "bins" => self.bins = one(k, v)?,
            "window" => self.window = one(k, v)?,
            "bonuses" => self.bonuses = list(k, v)?,
            "param" => self.param = one(k, v)?,
            "values" => self.values = list(k, v)?,
            "calibrate" => self.calibrate = one(k, v)?,
            "pilot_seeds" => self.pilot_seeds = seed_list(k, v)?,
            "pilot_cap" => self.pilot_cap = one(k, v)?,
            "budget" => self.budget = one(k, v)?,
            _ => return Err(HarnessError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Every field as `(key, value)`, in a form [`ExperimentConfig::set`] reads back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seeds", join(&self.seeds)),
            ("out", self.out.display().to_string()),
            ("format", self.format.to_string()),
            ("wall_clock", self.wall_clock.to_string()),
            ("env", self.env.to_string()),
            ("chain_length", self.chain_length.to_string()),
            ("grid_size", self.grid_size.to_string()),
            ("features", self.features.to_string()),
            ("agent", self.agent.to_string()),
            ("episodes", self.episodes.to_string()),
            ("steps", self.steps.to_string()),
            ("alpha", self.alpha.to_string()),
            ("gamma", self.gamma.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("lambda", self.lambda.to_string()),
            ("tau", self.tau.to_string()),
            (
                "train_schedule",
                schedule_name(self.train_schedule).to_string(),
            ),
            ("eval_every", self.eval_every.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("clip", self.clip.to_string()),
            ("epochs", self.epochs.to_string()),
            ("gae_lambda", self.gae_lambda.to_string()),
            ("gamma_int", self.gamma_int.to_string()),
            ("n_envs", self.n_envs.to_string()),
            ("rollout_len", self.rollout_len.to_string()),
            ("ppo_minibatch", self.ppo_minibatch.to_string()),
            ("ppo_lr", self.ppo_lr.to_string()),
            ("ppo_hidden", join(&self.ppo_hidden)),
            ("entropy", self.entropy.to_string()),
            ("bonus", self.bonus.to_string()),
            ("mean_mode", self.mean_mode.to_string()),
            ("mu", self.mu.to_string()),
            ("sigma", self.sigma.to_string()),
            ("dim", self.dim.to_string()),
            ("drnd_n", self.drnd_n.to_string()),
            ("est_lr", self.est_lr.to_string()),
            ("est_hidden", join(&self.est_hidden)),
            ("est_minibatch", self.est_minibatch.to_string()),
            ("count_sqrt", self.count_sqrt.to_string()),
            ("trials", self.trials.to_string()),
            ("ns", join(&self.ns)),
            ("deltas", join(&self.deltas)),
            ("dims", join(&self.dims)),
            ("mus", join(&self.mus)),
            ("mode", self.mode.to_string()),
            ("visits", self.visits.to_string()),
            ("points", self.points.to_string()),
            ("walk_points", self.walk_points.to_string()),
            ("samples_per_step", self.samples_per_step.to_string()),
            ("walk_steps", self.walk_steps.to_string()),
            ("walk_reps", self.walk_reps.to_string()),
            ("drnd_ns", join(&self.drnd_ns)),
            ("bins", self.bins.to_string()),
            ("window", self.window.to_string()),
            ("bonuses", join(&self.bonuses)),
            ("param", self.param.to_string()),
            ("values", join(&self.values)),
            ("calibrate", self.calibrate.to_string()),
            ("pilot_seeds", join(&self.pilot_seeds)),
            ("pilot_cap", self.pilot_cap.to_string()),
            ("budget", self.budget.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Fills fields whose defaults depend on the environment and agent.
    pub fn resolve(&mut self) {
        let tabular = self.agent == AgentKind::QLearn;
        if self.est_hidden.is_empty() {
            self.est_hidden = if tabular { vec![32] } else { vec![64, 64] };
        }
        if self.est_minibatch == 0 {
            self.est_minibatch = if tabular { 1 } else { 64 };
        }
        if self.episodes == 0 && tabular {
            self.episodes = 2000;
        }
        if self.steps == 0 && !tabular {
            self.steps = 200_000;
        }
    }

    /// Rejects invalid values, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let fail =
            |field: &str, why: &str| Err(HarnessError::Usage(format!("field `{field}`: {why}")));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.seeds.is_empty() {
            return fail("seeds", "at least one seed is required");
        }
        if self.chain_length < 2 {
            return fail("chain_length", "must be at least 2");
        }
        if self.grid_size < 5 {
            return fail("grid_size", "must be at least 5");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail("alpha", "must lie in (0, 1]");
        }
        if !unit(self.gamma) {
            return fail("gamma", "must lie in [0, 1]");
        }
        if !unit(self.epsilon) {
            return fail("epsilon", "must lie in [0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail("lambda", "must be finite and non-negative");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return fail("clip", "must lie in (0, 1)");
        }
        if self.epochs == 0 {
            return fail("epochs", "must be positive");
        }
        if !unit(self.gae_lambda) {
            return fail("gae_lambda", "must lie in [0, 1]");
        }
        if !unit(self.gamma_int) {
            return fail("gamma_int", "must lie in [0, 1]");
        }
        if self.n_envs == 0 || self.rollout_len == 0 || self.ppo_minibatch == 0 {
            return fail(
                "n_envs",
                "n_envs, rollout_len and ppo_minibatch must be positive",
            );
        }
        if !(self.ppo_lr > 0.0) {
            return fail("ppo_lr", "must be positive");
        }
        if self.ppo_hidden.contains(&0) || self.est_hidden.contains(&0) {
            return fail("est_hidden", "hidden widths must be positive");
        }
        if !self.mu.is_finite() {
            return fail("mu", "must be finite");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail("sigma", "must be finite and non-negative");
        }
        if self.sigma == 0.0 && self.command != Command::Train {
            return fail("sigma", "sigma = 0 is only meaningful for training runs");
        }
        if self.dim == 0 {
            return fail("dim", "must be positive");
        }
        if self.drnd_n < 2 {
            return fail("drnd_n", "DRND needs at least 2 targets");
        }
        if !(self.est_lr > 0.0) {
            return fail("est_lr", "must be positive");
        }
        match self.command {
            Command::VerifyStats => {
                if self.trials < 100 {
                    return fail("trials", "at least 100 trials are required");
                }
                if self.ns.is_empty() || self.ns.contains(&0) {
                    return fail("ns", "visit counts must be positive");
                }
                if self.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                    return fail("deltas", "each delta must lie in (0, 1)");
                }
                if self.dims.is_empty() || self.dims.contains(&0) {
                    return fail("dims", "dimensions must be positive");
                }
                if self.sigma == 0.0 {
                    return fail("sigma", "must be positive");
                }
            }
            Command::Toy => {
                if self.visits == 0
                    || self.points == 0
                    || self.walk_points == 0
                    || self.samples_per_step == 0
                    || self.walk_steps == 0
                    || self.walk_reps == 0
                {
                    return fail("visits", "visits, points, samples_per_step, walk_steps and walk_reps must be positive");
                }
                if self.drnd_ns.iter().any(|&n| n < 2) {
                    return fail("drnd_ns", "each DRND target count must be at least 2");
                }
            }
            Command::Train | Command::Ablate => {
                if self.agent == AgentKind::QLearn && self.env == EnvKind::MountainCar {
                    return fail("agent", "qlearn needs a finite state space (chain or grid)");
                }
            }
            Command::Density => {
                if self.env != EnvKind::MountainCar || self.agent != AgentKind::Ppo {
                    return fail("env", "density runs need env = mountaincar and agent = ppo");
                }
                if self.bins == 0 {
                    return fail("bins", "must be positive");
                }
                if self.window == 0 {
                    return fail("window", "must be positive");
                }
                if self.bonuses.is_empty() {
                    return fail("bonuses", "at least one estimator is required");
                }
            }
        }
        if self.command == Command::Ablate && self.values.is_empty() {
            return fail("values", "at least one value is required");
        }
        Ok(())
    }
}

pub fn schedule_name(s: TrainSchedule) -> &'static str {
    match s {
        TrainSchedule::EveryStep => "step",
        TrainSchedule::EpisodeEnd => "episode",
    }
}
