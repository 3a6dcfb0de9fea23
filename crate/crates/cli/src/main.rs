use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pursuit::experiment::{Algorithm, Command, StartStrategy};
use pursuit::{load_config, run_experiment, ExperimentSpec, RaceConfig, RiderOrder};

/// Team pursuit race simulation and pacing optimization.
#[derive(Parser)]
#[command(name = "pursuit", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate one strategy and power profile.
    Simulate(SimulateArgs),
    /// Optimize leader powers for a fixed strategy with CMA-ES.
    OptimizePower(OptimizePowerArgs),
    /// Search transition strategies, optimizing powers for each.
    OptimizeStrategy(OptimizeStrategyArgs),
    /// Unoptimised and iterative-allocation reference profiles.
    Baselines(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML race configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting rider order, e.g. ABC. Repeatable or comma-separated.
    #[arg(long = "order", value_delimiter = ',')]
    orders: Vec<String>,
    /// Directory for CSV reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Live half-lap counts, comma-separated; the standard strategy if omitted.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<u32>>,
    /// Leader powers in W, comma-separated; the last value repeats.
    #[arg(long, value_delimiter = ',')]
    profile: Option<Vec<f64>>,
}

#[derive(Args)]
struct OptimizePowerArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// CMA-ES evaluations per run.
    #[arg(long, default_value_t = 2000)]
    inner_budget: usize,
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<u32>>,
}

#[derive(Args)]
struct OptimizeStrategyArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 2000)]
    inner_budget: usize,
    /// Strategy evaluations per run.
    #[arg(long, default_value_t = 100)]
    outer_budget: usize,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::SimpleEa)]
    algorithm: AlgorithmArg,
    #[arg(long, value_enum, default_value_t = StartArg::Random)]
    start: StartArg,
    /// RLS only: run to a local optimum instead of stopping at the outer budget.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Rls,
    SimpleEa,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Random,
    Standard,
}

fn parse_orders(raw: &[String], fallback: &[RiderOrder]) -> Result<Vec<RiderOrder>, pursuit::Error> {
    if raw.is_empty() {
        return Ok(fallback.to_vec());
    }
    raw.iter().map(|s| s.trim().parse()).collect()
}

fn base_spec(
    command: Command,
    common: &CommonArgs,
    default_orders: &[RiderOrder],
) -> Result<(ExperimentSpec, RaceConfig), pursuit::Error> {
    let config = match &common.config {
        Some(path) => load_config(path)?,
        None => RaceConfig::default(),
    };
    let mut spec = ExperimentSpec::new(command);
    spec.orders = parse_orders(&common.orders, default_orders)?;
    spec.base_seed = common.seed;
    spec.output_dir = common.out.clone();
    spec.threads = common.threads;
    Ok((spec, config))
}

fn build(cli: Cli) -> Result<(ExperimentSpec, RaceConfig), pursuit::Error> {
    let abc = [RiderOrder::ABC];
    let all = RiderOrder::all();
    match cli.command {
        Sub::Simulate(a) => {
            let (mut spec, config) = base_spec(Command::Simulate, &a.common, &abc)?;
            spec.repetitions = 1;
            spec.strategy = a.strategy;
            spec.profile = a.profile;
            Ok((spec, config))
        }
        Sub::OptimizePower(a) => {
            let (mut spec, config) = base_spec(Command::OptimizePower, &a.common, &all)?;
            spec.repetitions = a.reps;
            spec.inner_budget = a.inner_budget;
            spec.strategy = a.strategy;
            Ok((spec, config))
        }
        Sub::OptimizeStrategy(a) => {
            let (mut spec, config) = base_spec(Command::OptimizeStrategy, &a.common, &all)?;
            spec.repetitions = a.reps;
            spec.inner_budget = a.inner_budget;
            spec.outer_budget = a.outer_budget;
            spec.exhaustive = a.exhaustive;
            spec.algorithm = match a.algorithm {
                AlgorithmArg::Rls => Algorithm::Rls,
                AlgorithmArg::SimpleEa => Algorithm::SimpleEa,
            };
            spec.start = match a.start {
                StartArg::Random => StartStrategy::Random,
                StartArg::Standard => StartStrategy::Standard,
            };
            Ok((spec, config))
        }
        Sub::Baselines(common) => {
            let (mut spec, config) = base_spec(Command::Baselines, &common, &abc)?;
            spec.repetitions = 1;
            Ok((spec, config))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = build(cli).and_then(|(spec, config)| run_experiment(&spec, &config));
    match outcome {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
