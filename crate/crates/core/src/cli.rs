//! Command-line front end: argument parsing and the five subcommands.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::env::{Action, Observation};
use crate::error::{Error, Result};
use crate::explain::{
    export_heatmaps, gaussian_observation, input_opt_to_csv, optimize_input, trace_parts,
    InputOptSpec,
};
use crate::init::{InitKind, Rng};
use crate::logio::{
    aggregate, mean_std, read_file, read_log, report_to_csv, write_file, write_log, AggregateReport,
};
use crate::nncore::Mlp;
use crate::ppo::{
    evaluate_greedy, train_with_observer, Checkpoint, Method, RolloutBuffer, RunConfig,
    TrainObserver, UpdateInfo,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const LOG_FILE: &str = "log.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const EVAL_HEADER: &str = "checkpoint,seed,episodes,mean_reward,std_reward";
pub const COMPARE_FILE: &str = "compare.csv";
pub const INPUT_OPT_FILE: &str = "input_opt.csv";
pub const DEFAULT_EVAL_EPISODES: usize = 10;

/// The non-negative methods compared by `compare`, in report order.
pub const TABLE_METHODS: [Method; 3] = [Method::CsgaKaiming, Method::CsgaXavier, Method::AsgaExp];

#[derive(Debug, Parser)]
#[command(
    name = "partppo",
    version,
    about = "Part-based PPO on a deterministic cart-pole"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one method for each seed.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint.
    Eval(EvalArgs),
    /// Aggregate trained runs into a per-method report.
    Compare(CompareArgs),
    /// Export part-based heatmap panels for one observation.
    Explain(ExplainArgs),
    /// Optimize an observation toward one action.
    OptimizeInput(OptimizeArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[arg(long)]
    pub method: Method,
    #[arg(long, value_delimiter = ',', env = "PARTPPO_SEED", default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 3000)]
    pub episodes: usize,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Flat `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Rate of the exponential initializer (asga-exp only).
    #[arg(long)]
    pub lambda_exp: Option<f64>,
    #[arg(long)]
    pub actor_lr: Option<f64>,
    #[arg(long)]
    pub critic_lr: Option<f64>,
    /// Also write `checkpoint-<episode>.txt` every N episodes.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EVAL_EPISODES)]
    pub episodes: usize,
    #[arg(long, env = "PARTPPO_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving `eval.csv`; defaults to the checkpoint's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_values_t = TABLE_METHODS)]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', env = "PARTPPO_SEED", default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EVAL_EPISODES)]
    pub eval_episodes: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    FrontFall,
    RearFall,
}

impl Scenario {
    pub fn observation(self) -> Observation {
        let mut obs = Observation::midpoint();
        obs.0[Observation::ANGLE] = match self {
            Scenario::FrontFall => 0.9,
            Scenario::RearFall => 0.1,
        };
        obs
    }
}

#[derive(Debug, Args, Clone)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, conflicts_with = "obs", required_unless_present = "obs")]
    pub scenario: Option<Scenario>,
    /// Four comma-separated normalized values.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub obs: Option<Vec<f64>>,
    #[arg(long, default_value = "heatmaps")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitMode {
    Midpoint,
    Gaussian,
}

#[derive(Debug, Args, Clone)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = parse_action)]
    pub action: Action,
    #[arg(long, value_enum, default_value_t = InitMode::Midpoint)]
    pub init: InitMode,
    #[arg(long, env = "PARTPPO_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = InputOptSpec::DEFAULT_EPOCHS,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub epochs: usize,
    #[arg(long, default_value_t = InputOptSpec::DEFAULT_STEP_SIZE)]
    pub step_size: f64,
    #[arg(long, default_value = "input-opt")]
    pub out: PathBuf,
}

fn parse_action(s: &str) -> std::result::Result<Action, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code; messages go to stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } => EXIT_NUMERIC,
        Error::Io { .. } | Error::Parse { .. } | Error::MissingRuns(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => {
            for dir in cmd_train(&a)? {
                println!("{}", dir.display());
            }
            Ok(())
        }
        Command::Eval(a) => {
            let (mean, std) = cmd_eval(&a)?;
            println!("mean_reward {mean} std_reward {std}");
            Ok(())
        }
        Command::Compare(a) => {
            let report = cmd_compare(&a)?;
            print!("{}", report_to_csv(&report));
            Ok(())
        }
        Command::Explain(a) => cmd_explain(&a),
        Command::OptimizeInput(a) => cmd_optimize_input(&a),
    }
}

pub fn run_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(method.name()).join(format!("seed-{seed}"))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::InvalidArgument(
            "--workers must be at least 1".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Defaults, then the config file, then the method and explicit flags.
pub fn train_config(args: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_kv_text(&path.display().to_string(), &read_file(path)?)?;
    }
    if let Some(rate) = args.lambda_exp {
        cfg.ppo.actor_init = InitKind::Exponential { rate };
    }
    args.method.configure(&mut cfg.ppo);
    cfg.ppo.episodes = args.episodes;
    if let Some(lr) = args.actor_lr {
        cfg.ppo.actor_lr = lr;
    }
    if let Some(lr) = args.critic_lr {
        cfg.ppo.critic_lr = lr;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Snapshots the networks every `every` episodes.
struct Snapshots<'a> {
    every: usize,
    dir: &'a Path,
    method: Method,
    config: RunConfig,
    latest: Option<(Mlp, Mlp)>,
    error: Option<Error>,
}

impl Snapshots<'_> {
    fn save(&mut self, episode: usize) {
        let Some((actor, critic)) = &self.latest else {
            return;
        };
        let ck = Checkpoint {
            method: self.method.name().to_string(),
            seed: self.config.ppo.seed,
            episode,
            config: self.config,
            actor: actor.clone(),
            critic: critic.clone(),
        };
        if let Err(e) = ck.save(&self.dir.join(format!("checkpoint-{episode}.txt"))) {
            self.error.get_or_insert(e);
        }
    }
}

impl TrainObserver for Snapshots<'_> {
    fn on_rollout(&mut self, episode: usize, _: &RolloutBuffer) {
        // Called before episode `episode` updates, so the latest snapshot
        // reflects the end of the previous episode.
        let done = episode - 1;
        if done > 0 && done.is_multiple_of(self.every) {
            self.save(done);
        }
    }

    fn on_update(&mut self, info: &UpdateInfo<'_>) {
        self.latest = Some((info.actor.clone(), info.critic.clone()));
    }
}

/// Trains every seed and writes `<out>/<method>/seed-<k>/`. Returns the run
/// directories in seed order.
pub fn cmd_train(args: &TrainArgs) -> Result<Vec<PathBuf>> {
    if args.seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    if args.checkpoint_every == Some(0) {
        return Err(Error::InvalidArgument(
            "--checkpoint-every must be at least 1".into(),
        ));
    }
    let base = train_config(args)?;
    let pool = thread_pool(args.workers)?;
    let results: Vec<Result<PathBuf>> = pool.install(|| {
        args.seeds
            .par_iter()
            .map(|&seed| train_one(args, base, seed))
            .collect()
    });
    results.into_iter().collect()
}

fn train_one(args: &TrainArgs, base: RunConfig, seed: u64) -> Result<PathBuf> {
    let mut cfg = base;
    cfg.ppo.seed = seed;
    let dir = run_dir(&args.out, args.method, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut snaps = Snapshots {
        every: args.checkpoint_every.unwrap_or(usize::MAX),
        dir: &dir,
        method: args.method,
        config: cfg,
        latest: None,
        error: None,
    };
    let mut outcome = train_with_observer(&cfg.ppo, &cfg.env, &mut snaps)?;
    if let Some(e) = snaps.error {
        return Err(e);
    }
    if cfg.ppo.episodes.is_multiple_of(snaps.every) {
        snaps.save(cfg.ppo.episodes);
        if let Some(e) = snaps.error {
            return Err(e);
        }
    }

    outcome.log.meta.method = args.method.name().to_string();
    write_log(&dir.join(LOG_FILE), &outcome.log)?;
    Checkpoint {
        method: args.method.name().to_string(),
        seed,
        episode: cfg.ppo.episodes,
        config: cfg,
        actor: outcome.actor,
        critic: outcome.critic,
    }
    .save(&dir.join(CHECKPOINT_FILE))?;
    Ok(dir)
}

/// Greedy rewards of a checkpoint's actor in its own environment.
pub fn eval_checkpoint(ck: &Checkpoint, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    evaluate_greedy(&ck.actor, &ck.config.env, episodes, seed)
}

/// Evaluates, appends a row to `eval.csv`, and returns (mean, std).
pub fn cmd_eval(args: &EvalArgs) -> Result<(f64, f64)> {
    if args.episodes == 0 {
        return Err(Error::InvalidArgument(
            "--episodes must be at least 1".into(),
        ));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let rewards = eval_checkpoint(&ck, args.episodes, args.seed)?;
    let (mean, std) = mean_std(&rewards);

    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args
            .checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let path = dir.join(EVAL_FILE);
    let fresh = !path.exists();
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(EVAL_HEADER);
        text.push('\n');
    }
    text.push_str(&format!(
        "{},{},{},{},{}\n",
        args.checkpoint.display(),
        args.seed,
        args.episodes,
        crate::kv::fmt_f64(mean),
        crate::kv::fmt_f64(std)
    ));
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    Ok((mean, std))
}

/// Evaluates each trained run with its own seed and writes `compare.csv`
/// with one row per method in the order given.
pub fn cmd_compare(args: &CompareArgs) -> Result<AggregateReport> {
    if args.seeds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "compare needs at least 2 seeds, got {}",
            args.seeds.len()
        )));
    }
    if args.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods given".into()));
    }
    if args.eval_episodes == 0 {
        return Err(Error::InvalidArgument(
            "--eval-episodes must be at least 1".into(),
        ));
    }
    let runs: Vec<(Method, u64, PathBuf)> = args
        .methods
        .iter()
        .flat_map(|&m| {
            args.seeds
                .iter()
                .map(move |&s| (m, s, run_dir(&args.out, m, s)))
        })
        .collect();
    let missing: Vec<PathBuf> = runs
        .iter()
        .flat_map(|(_, _, d)| [d.join(CHECKPOINT_FILE), d.join(LOG_FILE)])
        .filter(|p| !p.exists())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingRuns(missing));
    }

    let pool = thread_pool(args.workers)?;
    let loaded: Vec<Result<_>> = pool.install(|| {
        runs.par_iter()
            .map(|(_, seed, dir)| {
                let log = read_log(&dir.join(LOG_FILE))?;
                let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
                Ok((log, eval_checkpoint(&ck, args.eval_episodes, *seed)?))
            })
            .collect()
    });
    let loaded = loaded.into_iter().collect::<Result<Vec<_>>>()?;

    let rows = loaded
        .chunks(args.seeds.len())
        .map(aggregate)
        .collect::<Result<Vec<_>>>()?;
    let report = AggregateReport { rows };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_file(&args.out.join(COMPARE_FILE), &report_to_csv(&report))?;
    Ok(report)
}

pub fn cmd_explain(args: &ExplainArgs) -> Result<()> {
    let obs = match (&args.obs, args.scenario) {
        (Some(v), _) => Observation::from_slice(v)?,
        (None, Some(s)) => s.observation(),
        (None, None) => return Err(Error::InvalidArgument("give --scenario or --obs".into())),
    };
    let ck = Checkpoint::load(&args.checkpoint)?;
    let trace = trace_parts(&ck.actor, &obs)?;
    export_heatmaps(&trace, &args.out)?;
    println!(
        "forward {} backward {}",
        trace.action_probs[Action::Forward.index()],
        trace.action_probs[Action::Backward.index()]
    );
    Ok(())
}

pub fn cmd_optimize_input(args: &OptimizeArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let start = match args.init {
        InitMode::Midpoint => Observation::midpoint(),
        InitMode::Gaussian => gaussian_observation(&mut Rng::new(args.seed)),
    };
    let spec = InputOptSpec {
        target_action: args.action,
        epochs: args.epochs,
        step_size: args.step_size,
        initial_observation: start,
    };
    let result = optimize_input(&ck.actor, &spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_file(
        &args.out.join(INPUT_OPT_FILE),
        &input_opt_to_csv(&spec, &result),
    )?;
    println!("before {:?} loss {}", start.0, result.initial_loss);
    println!(
        "after  {:?} loss {}",
        result.observation.0,
        result.final_loss()
    );
    Ok(())
}
