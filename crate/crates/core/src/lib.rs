//! Team pursuit track cycling: race simulation and pacing-strategy optimization.
//!
//! The [`simulator`] turns a transition strategy (how many half-laps each
//! leader rides) and a power profile (leader power per segment) into a race
//! time. [`power_optimizer`] searches the power profile for a fixed strategy
//! with CMA-ES, and [`strategy_search`] searches strategies on top of it.
//! [`experiment`] runs seeded batches of these and writes CSV reports.

pub mod cmaes;
pub mod config;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod physics;
pub mod power_optimizer;
pub mod simulator;
pub mod strategy_search;

pub use config::{load_config, parse_config};
pub use encoding::{PowerProfile, Rider, RiderOrder, TrackGeometry, TransitionStrategy};
pub use error::{Error, Result};
pub use experiment::{run_experiment, summarize, ExperimentSpec, OptimizerReport};
pub use physics::{BikeParams, Environment, ModelConstants, RiderParams};
pub use power_optimizer::{CmaConfig, PowerOptResult};
pub use simulator::{penalized_fitness, simulate, PenaltyConfig, RaceConfig, RaceResult, TraceSample};
pub use strategy_search::{SearchConfig, StrategySolution};
