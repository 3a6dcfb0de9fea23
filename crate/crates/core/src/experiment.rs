//! Seeded batch experiments and their CSV reports.
//!
//! Every run gets its own seed, `derive_seed(base_seed, order_index,
//! repetition)`, where `order_index` is the position of the starting order in
//! [`RiderOrder::all`]. Any single run can therefore be reproduced in
//! isolation, and results do not depend on which orders were requested or on
//! how many worker threads ran them.
//!
//! Output directory layout:
//!
//! - `summary.csv`: one row per label (rider order, or baseline name)
//! - `runs.csv`: one row per run
//! - `best_trace_<label>.csv`: per-step trace of each label's best run
//! - `config.toml`: the effective race configuration

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::config_to_toml;
use crate::encoding::{standard_strategy, PowerProfile, RiderOrder, TransitionStrategy, STANDARD_FILLER};
use crate::error::{Error, Result};
use crate::power_optimizer::{
    default_power, iterative_power_allocation, optimize_powers_cmaes, unoptimised_profile, AllocationMode, CmaConfig,
    UnoptimisedKind,
};
use crate::simulator::{simulate, velocity_trace_csv, RaceConfig, RaceResult};
use crate::strategy_search::{evaluate_start, random_strategy, rls, simple_ea, BilevelFitness};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    OptimizePower,
    OptimizeStrategy,
    Baselines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Rls,
    SimpleEa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStrategy {
    Random,
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub orders: Vec<RiderOrder>,
    pub repetitions: usize,
    /// CMA-ES evaluations per power optimization.
    pub inner_budget: usize,
    /// Strategy evaluations per search run.
    pub outer_budget: usize,
    /// RLS runs until no neighbour is accepted, ignoring `outer_budget`.
    pub exhaustive: bool,
    pub algorithm: Algorithm,
    pub start: StartStrategy,
    pub base_seed: u64,
    /// Live half-lap counts for `simulate`/`optimize-power`; the standard
    /// strategy when `None`.
    pub strategy: Option<Vec<u32>>,
    /// Leader powers for `simulate`; the high-start reference when `None`.
    pub profile: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; rayon's default when `None`.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            orders: RiderOrder::all().to_vec(),
            repetitions: 100,
            inner_budget: 2000,
            outer_budget: 100,
            exhaustive: false,
            algorithm: Algorithm::SimpleEa,
            start: StartStrategy::Random,
            base_seed: 0,
            strategy: None,
            profile: None,
            output_dir: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() {
            return Err(Error::invalid("orders", "at least one rider order is required"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be >= 1"));
        }
        if self.command == Command::OptimizeStrategy && self.outer_budget == 0 && !self.exhaustive {
            return Err(Error::invalid("outer_budget", "must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads", "must be >= 1"));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(a ^ splitmix64(b))`.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

pub fn derive_seed(base_seed: u64, order_index: usize, repetition: usize) -> u64 {
    mix_seed(mix_seed(base_seed, order_index as u64), repetition as u64)
}

/// Position of `order` in [`RiderOrder::all`].
pub fn order_index(order: RiderOrder) -> usize {
    RiderOrder::all()
        .iter()
        .position(|&o| o == order)
        .expect("all orders are listed")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub best: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub n: usize,
}

/// Minimum, mean and sample standard deviation (n - 1 denominator).
pub fn summarize(times: &[f64]) -> Result<Summary> {
    if times.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = times.len();
    let best = times.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = times.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Summary { best, mean, sd, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub order: RiderOrder,
    pub repetition: usize,
    pub seed: u64,
    /// Simulated race time, s.
    pub time: f64,
    /// Penalized fitness, s; equals `time` for feasible runs.
    pub fitness: f64,
    pub feasible: bool,
    /// Fitness evaluations spent (inner evaluations, or outer for strategy search).
    pub evaluations: usize,
    pub strategy: TransitionStrategy,
    pub profile: PowerProfile,
    pub final_energies: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub order: RiderOrder,
    pub summary: Summary,
    /// Index into [`OptimizerReport::runs`].
    pub best_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub command: Command,
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
    pub config: RaceConfig,
}

impl OptimizerReport {
    pub fn best_run(&self, row: &SummaryRow) -> &RunRecord {
        &self.runs[row.best_run]
    }

    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Human-readable table. Statistics are over penalized fitness; the
    /// time and energy columns belong to the best run.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>10} {:>10} {:>8} {:>10}   {:>9} {:>9} {:>9}  strategy",
            "label", "runs", "best (s)", "mean (s)", "sd", "time (s)", "E_A (J)", "E_B (J)", "E_C (J)"
        );
        for row in &self.rows {
            let best = self.best_run(row);
            let s = row.summary;
            let sd = if s.n > 1 {
                format!("{:.3}", s.sd)
            } else {
                "n/a".to_string()
            };
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>10.2} {:>10.3} {:>8} {:>10.2}   {:>9.2} {:>9.2} {:>9.2}  {}",
                row.label,
                s.n,
                s.best,
                s.mean,
                sd,
                best.time,
                best.final_energies[0],
                best.final_energies[1],
                best.final_energies[2],
                best.strategy,
            );
        }
        out
    }

    /// Writes `summary.csv`, `runs.csv`, one best-run trace per row and
    /// `config.toml` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("summary.csv"), &self.summary_csv()?)?;
        write_file(&dir.join("runs.csv"), &self.runs_csv()?)?;
        for row in &self.rows {
            let trace = self.best_trace(row)?;
            write_file(
                &dir.join(format!("best_trace_{}.csv", row.label)),
                &velocity_trace_csv(&trace),
            )?;
        }
        write_file(&dir.join("config.toml"), &config_to_toml(&self.config))
    }

    /// Re-simulates the best run of `row` with a full trace.
    pub fn best_trace(&self, row: &SummaryRow) -> Result<RaceResult> {
        let best = self.best_run(row);
        simulate(&best.strategy, &best.profile, best.order, &self.config)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SUMMARY_HEADER)?;
        for row in &self.rows {
            let best = self.best_run(row);
            let s = row.summary;
            w.write_record([
                row.label.clone(),
                row.order.to_string(),
                s.n.to_string(),
                s.best.to_string(),
                s.mean.to_string(),
                s.sd.to_string(),
                best.repetition.to_string(),
                join_live_strategy(&best.strategy),
                join_live_profile(&best.strategy, &best.profile),
                best.final_energies[0].to_string(),
                best.final_energies[1].to_string(),
                best.final_energies[2].to_string(),
            ])?;
        }
        finish(w)
    }

    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RUNS_HEADER)?;
        for r in &self.runs {
            w.write_record([
                r.label.clone(),
                r.order.to_string(),
                r.repetition.to_string(),
                r.seed.to_string(),
                r.time.to_string(),
                r.fitness.to_string(),
                r.feasible.to_string(),
                r.evaluations.to_string(),
                join_live_strategy(&r.strategy),
                join_live_profile(&r.strategy, &r.profile),
                r.final_energies[0].to_string(),
                r.final_energies[1].to_string(),
                r.final_energies[2].to_string(),
            ])?;
        }
        finish(w)
    }
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "label",
    "order",
    "runs",
    "best_s",
    "mean_s",
    "sd_s",
    "best_repetition",
    "best_strategy",
    "best_profile_w",
    "final_energy_a_j",
    "final_energy_b_j",
    "final_energy_c_j",
];

pub const RUNS_HEADER: [&str; 13] = [
    "label",
    "order",
    "repetition",
    "seed",
    "time_s",
    "fitness_s",
    "feasible",
    "evaluations",
    "strategy",
    "profile_w",
    "final_energy_a_j",
    "final_energy_b_j",
    "final_energy_c_j",
];

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Live entries separated by spaces.
pub fn join_live_strategy(strategy: &TransitionStrategy) -> String {
    let parts: Vec<String> = strategy.live().iter().map(u32::to_string).collect();
    parts.join(" ")
}

/// Live entries separated by spaces.
pub fn join_live_profile(strategy: &TransitionStrategy, profile: &PowerProfile) -> String {
    let m = strategy.effective_length();
    let parts: Vec<String> = profile.0[..m].iter().map(f64::to_string).collect();
    parts.join(" ")
}

/// Builds a full-length strategy from live entries, padding with the standard filler.
pub fn strategy_from_live(live: &[u32], config: &RaceConfig) -> Result<TransitionStrategy> {
    let units = config.decision_len();
    if live.len() > units {
        return Err(Error::LengthMismatch {
            what: "strategy",
            expected: units,
            actual: live.len(),
        });
    }
    let mut hl = live.to_vec();
    hl.resize(units, STANDARD_FILLER.min(config.max_hl));
    TransitionStrategy::new(hl, config.max_hl)
}

/// Builds a full-length profile from leading entries. Missing entries repeat
/// the last given power, or take the default power if none is given.
pub fn profile_from_live(live: &[f64], config: &RaceConfig) -> Result<PowerProfile> {
    let units = config.decision_len();
    if live.len() > units {
        return Err(Error::LengthMismatch {
            what: "power profile",
            expected: units,
            actual: live.len(),
        });
    }
    let filler = live.last().copied().unwrap_or_else(|| default_power(config));
    let mut p = live.to_vec();
    p.resize(units, filler);
    Ok(PowerProfile(p))
}

struct Job {
    label: String,
    order: RiderOrder,
    repetition: usize,
    seed: u64,
    kind: JobKind,
}

#[derive(Clone, Copy)]
enum JobKind {
    Simulate,
    OptimizePower,
    OptimizeStrategy,
    Unoptimised(UnoptimisedKind),
    Iterative(AllocationMode),
}

const BASELINES: [(&str, JobKind); 4] = [
    ("unoptimised-1", JobKind::Unoptimised(UnoptimisedKind::HighStart)),
    ("unoptimised-2", JobKind::Unoptimised(UnoptimisedKind::Constant)),
    ("iterative-1", JobKind::Iterative(AllocationMode::HighStart)),
    ("iterative-2", JobKind::Iterative(AllocationMode::Even)),
];

/// Runs `spec` against `config` and, if `spec.output_dir` is set, writes the
/// report there.
pub fn run_experiment(spec: &ExperimentSpec, config: &RaceConfig) -> Result<OptimizerReport> {
    spec.validate()?;
    config.validate()?;
    if let Some(dir) = &spec.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut orders: Vec<RiderOrder> = Vec::with_capacity(spec.orders.len());
    for &o in &spec.orders {
        if !orders.contains(&o) {
            orders.push(o);
        }
    }
    let jobs = plan(spec, &orders);

    let execute = || -> Result<Vec<RunRecord>> { jobs.par_iter().map(|job| execute_job(job, spec, config)).collect() };
    let runs = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(execute)?,
        None => execute()?,
    };

    let mut rows: Vec<SummaryRow> = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        match rows.iter_mut().find(|r| r.label == run.label) {
            Some(row) => {
                if run.fitness < runs[row.best_run].fitness {
                    row.best_run = i;
                }
            }
            None => rows.push(SummaryRow {
                label: run.label.clone(),
                order: run.order,
                summary: Summary {
                    best: 0.0,
                    mean: 0.0,
                    sd: 0.0,
                    n: 0,
                },
                best_run: i,
            }),
        }
    }
    for row in &mut rows {
        let times: Vec<f64> = runs
            .iter()
            .filter(|r| r.label == row.label)
            .map(|r| r.fitness)
            .collect();
        row.summary = summarize(&times)?;
    }

    let report = OptimizerReport {
        command: spec.command,
        rows,
        runs,
        config: config.clone(),
    };
    if let Some(dir) = &spec.output_dir {
        report.write_to(dir)?;
    }
    Ok(report)
}

fn plan(spec: &ExperimentSpec, orders: &[RiderOrder]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &order in orders {
        let oi = order_index(order);
        match spec.command {
            Command::Baselines => {
                let prefix = if orders.len() > 1 {
                    format!("{order}-")
                } else {
                    String::new()
                };
                for (name, kind) in BASELINES {
                    jobs.push(Job {
                        label: format!("{prefix}{name}"),
                        order,
                        repetition: 0,
                        seed: derive_seed(spec.base_seed, oi, 0),
                        kind,
                    });
                }
            }
            Command::Simulate => jobs.push(Job {
                label: order.to_string(),
                order,
                repetition: 0,
                seed: derive_seed(spec.base_seed, oi, 0),
                kind: JobKind::Simulate,
            }),
            Command::OptimizePower | Command::OptimizeStrategy => {
                let kind = if spec.command == Command::OptimizePower {
                    JobKind::OptimizePower
                } else {
                    JobKind::OptimizeStrategy
                };
                for rep in 0..spec.repetitions {
                    jobs.push(Job {
                        label: order.to_string(),
                        order,
                        repetition: rep,
                        seed: derive_seed(spec.base_seed, oi, rep),
                        kind,
                    });
                }
            }
        }
    }
    jobs
}

fn fixed_strategy(spec: &ExperimentSpec, config: &RaceConfig) -> Result<TransitionStrategy> {
    match &spec.strategy {
        Some(live) => strategy_from_live(live, config),
        None => standard_strategy(&config.geometry, config.max_hl),
    }
}

fn execute_job(job: &Job, spec: &ExperimentSpec, config: &RaceConfig) -> Result<RunRecord> {
    let (strategy, profile, evaluations) = match job.kind {
        JobKind::Simulate => {
            let strategy = fixed_strategy(spec, config)?;
            let profile = match &spec.profile {
                Some(p) => profile_from_live(p, config)?,
                None => unoptimised_profile(UnoptimisedKind::HighStart, config),
            };
            (strategy, profile, 0)
        }
        JobKind::Unoptimised(kind) => {
            let strategy = standard_strategy(&config.geometry, config.max_hl)?;
            (strategy, unoptimised_profile(kind, config), 0)
        }
        JobKind::Iterative(mode) => {
            let strategy = standard_strategy(&config.geometry, config.max_hl)?;
            let profile = iterative_power_allocation(&strategy, job.order, mode, config)?;
            (strategy, profile, 0)
        }
        JobKind::OptimizePower => {
            let strategy = fixed_strategy(spec, config)?;
            let init = PowerProfile::constant(default_power(config), strategy.len());
            let cma = CmaConfig {
                max_evaluations: spec.inner_budget,
                seed: job.seed,
                ..CmaConfig::default()
            };
            let r = optimize_powers_cmaes(&strategy, job.order, &init, config, &cma)?;
            (strategy, r.best_profile, r.evaluations_used)
        }
        JobKind::OptimizeStrategy => {
            let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
            let start = match spec.start {
                StartStrategy::Random => random_strategy(config.decision_len(), config.max_hl, &mut rng)?,
                StartStrategy::Standard => standard_strategy(&config.geometry, config.max_hl)?,
            };
            let inner = CmaConfig {
                max_evaluations: spec.inner_budget,
                seed: mix_seed(job.seed, u64::MAX),
                ..CmaConfig::default()
            };
            let mut fitness = BilevelFitness::new(config, inner);
            let start = evaluate_start(start, job.order, config, &mut fitness)?;
            let outcome = match spec.algorithm {
                Algorithm::Rls => {
                    let budget = (!spec.exhaustive).then_some(spec.outer_budget);
                    rls(start, &mut fitness, budget, &mut rng)?
                }
                Algorithm::SimpleEa => simple_ea(start, &mut fitness, spec.outer_budget, &mut rng)?,
            };
            (outcome.best.strategy, outcome.best.profile, outcome.evaluations)
        }
    };

    let result = simulate(&strategy, &profile, job.order, config)?;
    let fitness = crate::simulator::penalized_fitness(&strategy, &profile, job.order, config)?;
    Ok(RunRecord {
        label: job.label.clone(),
        order: job.order,
        repetition: job.repetition,
        seed: job.seed,
        time: result.total_time,
        fitness,
        feasible: result.feasible,
        evaluations,
        strategy,
        profile,
        final_energies: result.final_energies,
    })
}
