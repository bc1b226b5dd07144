use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qram_core::agent::{self, AgentModel, TrainConfig};
use qram_core::bench;
use qram_core::env::RewardScale;
use qram_core::{generate_scenario, Constraint, QramError};

mod solve;

#[derive(Parser)]
#[command(name = "qram", version, about = "Radar resource allocation: Q-RAM solvers, actor-critic agent, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario.
    Gen {
        #[arg(long)]
        targets: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a scenario with one method and write the result as JSON.
    Solve(SolveArgs),
    /// Train the agent and write its weights and learning curve.
    Train(TrainArgs),
    /// Utility and runtime comparisons written as CSV.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Small fixed demonstrations.
    #[command(subcommand)]
    Demo(DemoCommand),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Classic,
    Agent,
    Brute,
    Dp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    Vector,
    Compound,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Vector => Constraint::Vector,
            ConstraintArg::Compound => Constraint::Compound,
        }
    }
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Time-occupancy bound (default: min(0.03 n, 1)).
    #[arg(long)]
    pub occupancy: Option<f64>,
    /// Average power bound in kW (default 5).
    #[arg(long)]
    pub power: Option<f64>,
}

#[derive(Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Agent weights, required by `--method agent`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub bounds: BoundsArgs,
    #[arg(long, value_enum, default_value = "vector")]
    pub constraint: ConstraintArg,
    /// Resource grid step of the knapsack oracle (default: capacity / 2000).
    #[arg(long)]
    pub dp_step: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 7e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.005)]
    discount: f64,
    #[arg(long, default_value_t = 0.01)]
    entropy_coeff: f64,
    #[arg(long, default_value_t = 0.5)]
    value_coeff: f64,
    #[arg(long, default_value_t = 0.99)]
    rmsprop_decay: f64,
    #[arg(long, default_value_t = 1e-5)]
    rmsprop_epsilon: f64,
    /// Episodes per learning-curve row.
    #[arg(long, default_value_t = 100)]
    log_every: usize,
    #[arg(long, default_value_t = qram_core::env::QCAP)]
    reward_cap: f64,
    #[arg(long, value_enum, default_value = "log")]
    reward_scale: ScaleArg,
    /// Reward downgrades with the plain quotient instead of -1.
    #[arg(long)]
    no_downgrade_penalty: bool,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Classic versus agent system utility by number of targets.
    Utility {
        /// Inclusive range `LO..HI`.
        #[arg(long, default_value = "20..150")]
        targets: String,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wall-clock comparisons.
    Runtime {
        #[arg(long, value_enum)]
        mode: RuntimeMode,
        /// Agent weights; by-configs falls back to a seeded untrained network.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// by-targets: inclusive range `LO..HI`.
        #[arg(long, default_value = "20..150")]
        targets: String,
        #[arg(long, default_value_t = 10)]
        step: usize,
        /// by-configs: comma-separated configuration counts.
        #[arg(long, default_value = "90,180,450,900,1800,4500")]
        configs: String,
        /// by-configs: targets timed per run.
        #[arg(long, default_value_t = 20)]
        tasks: usize,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form operation counts `t c ln c` and `t c l n^2`.
    Model {
        #[arg(long, default_value = "20..150")]
        targets: String,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value = "90,180,450,900,1800,4500")]
        configs: String,
        #[arg(long, default_value_t = 6)]
        layers: usize,
        #[arg(long, default_value_t = 100)]
        neurons: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RuntimeMode {
    ByTargets,
    ByConfigs,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Greedy utility dropping when the configuration set grows.
    Remark1 {
        #[arg(long)]
        out: PathBuf,
    },
}

/// A command-line mistake the parser cannot catch.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<QramError>() {
        Some(QramError::Argument(_) | QramError::Unsupported(_)) => 2,
        Some(QramError::Capacity { .. }) => 3,
        Some(QramError::Training(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { targets, seed, out } => {
            if targets == 0 {
                return Err(usage("--targets must be at least 1"));
            }
            let scenario = generate_scenario(targets, seed)?;
            write_json(&out, &scenario)
        }
        Command::Solve(args) => solve::run(&args),
        Command::Train(args) => train(args),
        Command::Bench(cmd) => run_bench(cmd),
        Command::Demo(DemoCommand::Remark1 { out }) => write_csv(&out, &bench::remark1_demo()?),
    }
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = TrainConfig {
        discount: a.discount,
        learning_rate: a.learning_rate,
        rmsprop_decay: a.rmsprop_decay,
        rmsprop_epsilon: a.rmsprop_epsilon,
        entropy_coeff: a.entropy_coeff,
        value_coeff: a.value_coeff,
        total_steps: a.steps,
        seed: a.seed,
        log_every: a.log_every,
        ..TrainConfig::default()
    };
    cfg.env.reward_cap = a.reward_cap;
    cfg.env.reward_scale = match a.reward_scale {
        ScaleArg::Linear => RewardScale::Linear,
        ScaleArg::Log => RewardScale::Log,
    };
    if a.no_downgrade_penalty {
        cfg.env.downgrade_reward = None;
    }
    if !(a.reward_cap > 0.0) {
        return Err(usage("--reward-cap must be positive"));
    }
    let outcome = agent::train(&cfg)?;
    let model = AgentModel::new(outcome.params, cfg.env.space.clone(), cfg.env.bounds.clone())?;
    agent::save(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(curve) = &a.curve {
        write_csv(curve, &outcome.curve)?;
    }
    Ok(())
}

fn run_bench(cmd: BenchCommand) -> anyhow::Result<()> {
    match cmd {
        BenchCommand::Utility { targets, step, runs, weights, seed, out } => {
            let counts = parse_range(&targets, step)?;
            if runs == 0 {
                return Err(usage("--runs must be at least 1"));
            }
            let model = load_model(&weights)?;
            write_csv(&out, &bench::utility_bench(&model, &counts, runs, seed)?)
        }
        BenchCommand::Runtime { mode, weights, targets, step, configs, tasks, runs, seed, out } => {
            if runs == 0 {
                return Err(usage("--runs must be at least 1"));
            }
            match mode {
                RuntimeMode::ByTargets => {
                    let weights = weights.ok_or_else(|| usage("by-targets needs --weights"))?;
                    let model = load_model(&weights)?;
                    write_csv(&out, &bench::runtime_by_targets(&model, &parse_range(&targets, step)?, runs, seed)?)
                }
                RuntimeMode::ByConfigs => {
                    let model = match weights {
                        Some(w) => load_model(&w)?,
                        None => {
                            let space = qram_core::ConfigSpace::table_one();
                            let params = agent::AgentParams::init(agent::NetShape::for_space(&space), seed);
                            AgentModel::new(params, space, qram_core::default_bounds(qram_core::env::TRAINING_TARGETS))?
                        }
                    };
                    write_csv(&out, &bench::runtime_by_configs(&model, &parse_list(&configs)?, runs, tasks, seed)?)
                }
            }
        }
        BenchCommand::Model { targets, step, configs, layers, neurons, out } => {
            let rows = bench::complexity_model(&parse_range(&targets, step)?, &parse_list(&configs)?, layers, neurons);
            write_csv(&out, &rows)
        }
    }
}

pub(crate) fn load_model(path: &Path) -> anyhow::Result<AgentModel> {
    agent::load(path).with_context(|| format!("loading weights from {}", path.display()))
}

/// `LO..HI` inclusive, every `step`.
fn parse_range(text: &str, step: usize) -> anyhow::Result<Vec<usize>> {
    let (lo, hi) = text.split_once("..").ok_or_else(|| usage(format!("expected LO..HI, got {text:?}")))?;
    let lo: usize = lo.trim().parse().map_err(|_| usage(format!("bad range start in {text:?}")))?;
    let hi: usize = hi.trim().parse().map_err(|_| usage(format!("bad range end in {text:?}")))?;
    if step == 0 || lo == 0 || hi < lo {
        return Err(usage(format!("empty or invalid range {text:?} with step {step}")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn parse_list(text: &str) -> anyhow::Result<Vec<usize>> {
    let list: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("bad list entry {s:?}"))))
        .collect::<anyhow::Result<_>>()?;
    if list.is_empty() {
        bail!(usage("empty list"));
    }
    Ok(list)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
