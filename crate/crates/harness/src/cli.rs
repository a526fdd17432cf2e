//! Command-line front end. Flags are applied on top of `--config`, so a
//! flag always wins over the file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{ablate, density, toy, train, verify};
use crate::config::{Command, ExperimentConfig};
use crate::error::{HarnessError, Result};

/// Exit status when `verify-stats` finds a failing row.
pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rdd", version, about = "Exploration bonus experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Monte Carlo check of the visitation statistics.
    VerifyStats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        stats: StatsFlags,
    },
    /// Bonus decay traces and the scripted tracker walk.
    Toy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        toy: ToyFlags,
    },
    /// Train an agent with an exploration bonus.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Windowed x-position occupancy of PPO on MountainCar.
    Density {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        bins: Option<String>,
        #[arg(long)]
        window: Option<String>,
        /// Comma-separated estimators to compare, `none` included.
        #[arg(long)]
        bonuses: Option<String>,
    },
    /// Sweep one target parameter.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunFlags,
        /// One of mu, sigma, dim.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` file; a run manifest is accepted too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Comma list or range such as `0..5`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Record elapsed milliseconds in metrics rows.
    #[arg(long)]
    pub wall_clock: bool,
    /// Any config key, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsFlags {
    #[arg(long)]
    pub trials: Option<String>,
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub mus: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
}

#[derive(Debug, Args)]
pub struct ToyFlags {
    /// decay or walk.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub visits: Option<String>,
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub drnd_ns: Option<String>,
    #[arg(long)]
    pub walk_steps: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// chain, grid or mountaincar.
    #[arg(long)]
    pub env: Option<String>,
    /// qlearn or ppo.
    #[arg(long)]
    pub agent: Option<String>,
    /// rdd, rnd, drnd, count or none.
    #[arg(long)]
    pub bonus: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub episodes: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub drnd_n: Option<String>,
    /// Bonus scale (beta for PPO).
    #[arg(long)]
    pub lambda: Option<String>,
    /// Use 1/sqrt(n) for the count bonus.
    #[arg(long)]
    pub count_sqrt: bool,
    /// Calibrate the episode budget on pilot seeds first.
    #[arg(long)]
    pub calibrate: bool,
}

type Pairs = Vec<(&'static str, String)>;

fn push(out: &mut Pairs, key: &'static str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key, v.clone()));
    }
}

impl StatsFlags {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "trials", &self.trials);
        push(out, "ns", &self.ns);
        push(out, "deltas", &self.deltas);
        push(out, "dims", &self.dims);
        push(out, "mus", &self.mus);
        push(out, "sigma", &self.sigma);
    }
}

impl ToyFlags {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "mode", &self.mode);
        push(out, "visits", &self.visits);
        push(out, "points", &self.points);
        push(out, "dim", &self.dim);
        push(out, "mu", &self.mu);
        push(out, "sigma", &self.sigma);
        push(out, "drnd_ns", &self.drnd_ns);
        push(out, "walk_steps", &self.walk_steps);
    }
}

impl RunFlags {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "env", &self.env);
        push(out, "agent", &self.agent);
        push(out, "bonus", &self.bonus);
        push(out, "steps", &self.steps);
        push(out, "episodes", &self.episodes);
        push(out, "mu", &self.mu);
        push(out, "sigma", &self.sigma);
        push(out, "dim", &self.dim);
        push(out, "drnd_n", &self.drnd_n);
        push(out, "lambda", &self.lambda);
        if self.count_sqrt {
            out.push(("count_sqrt", "true".into()));
        }
        if self.calibrate {
            out.push(("calibrate", "true".into()));
        }
    }
}

/// Resolves the subcommand into a config: defaults, then the config file,
/// then flags.
pub fn build_config(sub: &Sub) -> Result<ExperimentConfig> {
    let mut pairs: Pairs = Vec::new();
    let (command, common) = match sub {
        Sub::VerifyStats { common, stats } => {
            stats.pairs(&mut pairs);
            (Command::VerifyStats, common)
        }
        Sub::Toy { common, toy } => {
            toy.pairs(&mut pairs);
            (Command::Toy, common)
        }
        Sub::Train { common, run } => {
            run.pairs(&mut pairs);
            (Command::Train, common)
        }
        Sub::Density {
            common,
            run,
            bins,
            window,
            bonuses,
        } => {
            run.pairs(&mut pairs);
            push(&mut pairs, "bins", bins);
            push(&mut pairs, "window", window);
            push(&mut pairs, "bonuses", bonuses);
            (Command::Density, common)
        }
        Sub::Ablate {
            common,
            run,
            param,
            values,
        } => {
            run.pairs(&mut pairs);
            push(&mut pairs, "param", param);
            push(&mut pairs, "values", values);
            (Command::Ablate, common)
        }
    };
    let mut cfg = ExperimentConfig::new(command);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        cfg.apply_text(&text)?;
    }
    push(&mut pairs, "seeds", &common.seeds);
    push(&mut pairs, "seed", &common.seed);
    push(&mut pairs, "out", &common.out);
    push(&mut pairs, "format", &common.format);
    if common.wall_clock {
        pairs.push(("wall_clock", "true".into()));
    }
    for (k, v) in pairs {
        cfg.set(k, &v)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| HarnessError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

/// Runs a resolved config and returns the process exit status.
pub fn execute(cfg: &ExperimentConfig) -> Result<i32> {
    match cfg.command {
        Command::VerifyStats => {
            let rows = verify::run_verify(cfg)?;
            verify::report(&rows);
            Ok(if rows.iter().all(|r| r.pass) {
                0
            } else {
                EXIT_ACCEPTANCE
            })
        }
        Command::Toy => {
            toy::report(&toy::run_toy(cfg)?);
            Ok(0)
        }
        Command::Train => {
            train::report(&train::run_train(cfg)?);
            Ok(0)
        }
        Command::Density => {
            density::report(&density::run_density(cfg)?);
            Ok(0)
        }
        Command::Ablate => {
            ablate::report(&ablate::run_ablate(cfg)?);
            Ok(0)
        }
    }
}

/// Parses `args` (program name first), runs, and maps failures to exit codes:
/// 1 for usage errors, 2 for failed runs, 3 for failed verification.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match build_config(&cli.command).and_then(|cfg| execute(&cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
