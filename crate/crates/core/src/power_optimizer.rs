//! Power-profile optimization for a fixed transition strategy and rider order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmaes;
use crate::encoding::{PowerProfile, RiderOrder, TransitionStrategy};
use crate::error::Result;
use crate::simulator::{PreparedRace, RaceConfig};

/// Starting power for entries with no incumbent value, W.
pub const DEFAULT_POWER: f64 = 400.0;
/// Opening power of the high-start reference profiles, W.
pub const HIGH_START_POWER: f64 = 900.0;
/// Power after the opening segment of the high-start reference profile, W.
pub const HIGH_START_CRUISE_POWER: f64 = 364.0;
/// Constant reference profile, W.
pub const CONSTANT_POWER: f64 = 409.0;

/// [`DEFAULT_POWER`] clipped into the configured bounds.
pub fn default_power(config: &RaceConfig) -> f64 {
    DEFAULT_POWER.clamp(config.power_min, config.power_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaConfig {
    /// W
    pub initial_sigma: f64,
    pub max_evaluations: usize,
    /// `None` uses `4 + floor(3 ln m)`.
    pub population_size: Option<usize>,
    pub seed: u64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        Self {
            initial_sigma: 10.0,
            max_evaluations: 2000,
            population_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOptResult {
    pub best_profile: PowerProfile,
    pub best_fitness: f64,
    pub evaluations_used: usize,
}

/// CMA-ES over the live entries of the profile, mean started at `init_profile`.
///
/// Returns the best candidate seen, including `init_profile` itself (which is
/// not charged to the budget). Entries past the live prefix are returned as given.
pub fn optimize_powers_cmaes(
    strategy: &TransitionStrategy,
    order: RiderOrder,
    init_profile: &PowerProfile,
    config: &RaceConfig,
    cma: &CmaConfig,
) -> Result<PowerOptResult> {
    let race = PreparedRace::new(strategy, order, config)?;
    let init_fitness = race.penalized_fitness(init_profile)?;
    let m = race.live_len();
    let mut result = PowerOptResult {
        best_profile: init_profile.clone(),
        best_fitness: init_fitness,
        evaluations_used: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cma.seed);
    let found = cmaes::minimize(
        |x| race.fitness_live(x),
        &init_profile.0[..m],
        cma.initial_sigma,
        cma.population_size,
        cma.max_evaluations,
        &mut rng,
    );
    if let Some(min) = found {
        result.evaluations_used = min.evaluations;
        if min.value < result.best_fitness {
            result.best_fitness = min.value;
            result.best_profile.0[..m].copy_from_slice(&min.x);
        }
    }
    Ok(result)
}

/// (1+1) random search: perturb every live entry by uniform noise in
/// `[-step, step]` and keep strict improvements.
pub fn optimize_powers_random(
    strategy: &TransitionStrategy,
    order: RiderOrder,
    init_profile: &PowerProfile,
    config: &RaceConfig,
    budget: usize,
    step: f64,
    seed: u64,
) -> Result<PowerOptResult> {
    let race = PreparedRace::new(strategy, order, config)?;
    let mut best_fitness = race.penalized_fitness(init_profile)?;
    let m = race.live_len();
    let mut incumbent = init_profile.0[..m].to_vec();
    let mut candidate = incumbent.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = step.abs();
    for _ in 0..budget {
        for (c, &x) in candidate.iter_mut().zip(&incumbent) {
            let noise = if step > 0.0 { rng.gen_range(-step..=step) } else { 0.0 };
            *c = x + noise;
        }
        let f = race.fitness_live(&candidate);
        if f < best_fitness {
            best_fitness = f;
            incumbent.copy_from_slice(&candidate);
        }
    }
    let mut best_profile = init_profile.clone();
    best_profile.0[..m].copy_from_slice(&incumbent);
    Ok(PowerOptResult {
        best_profile,
        best_fitness,
        evaluations_used: budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnoptimisedKind {
    /// 900 W for the opening segment, 364 W afterwards.
    HighStart,
    /// 409 W throughout.
    Constant,
}

pub fn unoptimised_profile(kind: UnoptimisedKind, config: &RaceConfig) -> PowerProfile {
    let len = config.decision_len();
    match kind {
        UnoptimisedKind::HighStart => {
            let mut p = PowerProfile::constant(HIGH_START_CRUISE_POWER, len);
            p.0[0] = HIGH_START_POWER;
            p
        }
        UnoptimisedKind::Constant => PowerProfile::constant(CONSTANT_POWER, len),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationMode {
    /// Opening segment fixed at [`HIGH_START_POWER`]; the rest follows the pattern.
    HighStart,
    /// Every segment follows the pattern.
    Even,
}

const ALLOCATION_START_POWER: f64 = 300.0;
const ALLOCATION_BALANCE_ROUNDS: usize = 200;
const ALLOCATION_BALANCE_TOLERANCE: f64 = 1.0;
const ALLOCATION_INITIAL_STEP: f64 = 16.0;
const ALLOCATION_MIN_STEP: f64 = 0.25;
const ALLOCATION_MAX_SWEEPS: usize = 10_000;

/// Energy-exhausting allocation over a period-3 power pattern.
///
/// Segment `i` gets pattern slot `i mod 3`; since the leader rotates every
/// segment, slot `j` is the lead power of the rider in starting position `j`.
/// Two passes:
///
/// 1. Balance: each slot's power is moved by its rider's leftover energy
///    divided by that rider's total lead time, until every leftover is within
///    1 J of zero. Riders then back off in shrinking steps until all final
///    energies are non-negative.
/// 2. Polish: each slot is moved up or down by a step whenever the move keeps
///    every final energy non-negative and lowers the total energy left at the
///    line. The step halves whenever a full sweep makes no move, down to 0.25 W.
pub fn iterative_power_allocation(
    strategy: &TransitionStrategy,
    order: RiderOrder,
    mode: AllocationMode,
    config: &RaceConfig,
) -> Result<PowerProfile> {
    let race = PreparedRace::new(strategy, order, config)?;
    let m = race.live_len();
    let fixed_first = mode == AllocationMode::HighStart;
    let clamp = |p: f64| p.clamp(config.power_min, config.power_max);
    let build = |pattern: &[f64; 3]| -> PowerProfile {
        let mut full = PowerProfile::constant(default_power(config), strategy.len());
        for (i, p) in full.0[..m].iter_mut().enumerate() {
            *p = if i == 0 && fixed_first {
                clamp(HIGH_START_POWER)
            } else {
                pattern[i % 3]
            };
        }
        full
    };
    let run = |pattern: &[f64; 3]| race.simulate(&build(pattern));
    let slot_rider = |j: usize| order.at(j).index();

    let mut pattern = [clamp(ALLOCATION_START_POWER); 3];

    for _ in 0..ALLOCATION_BALANCE_ROUNDS {
        let result = run(&pattern)?;
        let mut lead_time = [0.0; 3];
        for (i, t) in result.segment_times.iter().enumerate() {
            if !(i == 0 && fixed_first) {
                lead_time[i % 3] += t;
            }
        }
        let mut settled = true;
        for j in 0..3 {
            let left = result.final_energies[slot_rider(j)];
            if lead_time[j] > 0.0 && left.abs() > ALLOCATION_BALANCE_TOLERANCE {
                let next = clamp(pattern[j] + left / lead_time[j]);
                settled &= next == pattern[j];
                pattern[j] = next;
            }
        }
        if settled {
            break;
        }
    }

    let mut back_off = ALLOCATION_MIN_STEP;
    loop {
        let result = run(&pattern)?;
        if result.feasible {
            break;
        }
        let mut moved = false;
        for (j, p) in pattern.iter_mut().enumerate() {
            if result.final_energies[slot_rider(j)] < 0.0 && *p > config.power_min {
                *p = clamp(*p - back_off);
                moved = true;
            }
        }
        if !moved {
            // Deficits the slots cannot fix (e.g. the fixed opening segment):
            // fall back to the lowest pattern.
            if pattern.iter().all(|&p| p == config.power_min) {
                break;
            }
            pattern = [config.power_min; 3];
        }
        back_off *= 2.0;
    }

    // Energy left at the line, or None if infeasible.
    let leftover = |pattern: &[f64; 3]| -> Option<f64> {
        if pattern.iter().any(|&p| p < config.power_min || p > config.power_max) {
            return None;
        }
        let result = run(pattern).ok()?;
        result.feasible.then(|| result.final_energies.iter().sum())
    };
    let mut current = leftover(&pattern).unwrap_or(f64::INFINITY);
    let mut step = ALLOCATION_INITIAL_STEP;
    let mut sweeps = 0;
    while step >= ALLOCATION_MIN_STEP && sweeps < ALLOCATION_MAX_SWEEPS {
        sweeps += 1;
        let mut moved = false;
        for j in 0..3 {
            for delta in [step, -step] {
                let mut trial = pattern;
                trial[j] += delta;
                if let Some(e) = leftover(&trial) {
                    if e < current {
                        pattern = trial;
                        current = e;
                        moved = true;
                        break;
                    }
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }

    Ok(build(&pattern))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::standard_strategy;
    use crate::simulator::{penalized_fitness, simulate};

    fn setup() -> (RaceConfig, TransitionStrategy) {
        let cfg = RaceConfig::default();
        let s = standard_strategy(&cfg.geometry, cfg.max_hl).unwrap();
        (cfg, s)
    }

    #[test]
    fn reference_profiles() {
        let (cfg, _) = setup();
        let hs = unoptimised_profile(UnoptimisedKind::HighStart, &cfg);
        assert_eq!(hs.len(), 23);
        assert_eq!(hs.0[0], 900.0);
        assert!(hs.0[1..].iter().all(|&p| p == 364.0));
        let c = unoptimised_profile(UnoptimisedKind::Constant, &cfg);
        assert!(c.0.iter().all(|&p| p == 409.0));
    }

    #[test]
    fn zero_budget_returns_init() {
        let (cfg, s) = setup();
        let init = PowerProfile::constant(400.0, 23);
        let f0 = penalized_fitness(&s, &init, RiderOrder::ABC, &cfg).unwrap();
        let cma = CmaConfig {
            max_evaluations: 0,
            ..CmaConfig::default()
        };
        let r = optimize_powers_cmaes(&s, RiderOrder::ABC, &init, &cfg, &cma).unwrap();
        assert_eq!(r.best_profile, init);
        assert_eq!(r.best_fitness, f0);
        assert_eq!(r.evaluations_used, 0);

        let r = optimize_powers_random(&s, RiderOrder::ABC, &init, &cfg, 0, 10.0, 1).unwrap();
        assert_eq!(r.best_profile, init);
        assert_eq!(r.best_fitness, f0);
    }

    #[test]
    fn zero_step_never_moves() {
        let (cfg, s) = setup();
        let init = PowerProfile::constant(400.0, 23);
        let r = optimize_powers_random(&s, RiderOrder::ABC, &init, &cfg, 50, 0.0, 3).unwrap();
        assert_eq!(r.best_profile, init);
    }

    #[test]
    fn cmaes_improves_and_reverifies() {
        let (cfg, s) = setup();
        let init = PowerProfile::constant(400.0, 23);
        let f0 = penalized_fitness(&s, &init, RiderOrder::ABC, &cfg).unwrap();
        let cma = CmaConfig {
            max_evaluations: 300,
            seed: 9,
            ..CmaConfig::default()
        };
        let r = optimize_powers_cmaes(&s, RiderOrder::ABC, &init, &cfg, &cma).unwrap();
        assert!(r.best_fitness <= f0);
        assert_eq!(r.evaluations_used, 300);
        let again = penalized_fitness(&s, &r.best_profile, RiderOrder::ABC, &cfg).unwrap();
        assert_eq!(again, r.best_fitness);
        assert_eq!(&r.best_profile.0[12..], &init.0[12..]);
        let r2 = optimize_powers_cmaes(&s, RiderOrder::ABC, &init, &cfg, &cma).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn iterative_allocation_exhausts_energy() {
        let (cfg, s) = setup();
        let p = iterative_power_allocation(&s, RiderOrder::ABC, AllocationMode::HighStart, &cfg).unwrap();
        assert_eq!(p.0[0], 900.0);
        let r = simulate(&s, &p, RiderOrder::ABC, &cfg).unwrap();
        assert!(r.feasible);
        for e in r.final_energies {
            assert!((0.0..100.0).contains(&e), "{:?}", r.final_energies);
        }
        assert!(p.0[..12].iter().all(|&x| (100.0..=1000.0).contains(&x)));
    }

    #[test]
    fn even_allocation_is_slower_than_high_start() {
        let (cfg, s) = setup();
        let hs = iterative_power_allocation(&s, RiderOrder::ABC, AllocationMode::HighStart, &cfg).unwrap();
        let even = iterative_power_allocation(&s, RiderOrder::ABC, AllocationMode::Even, &cfg).unwrap();
        let t_hs = simulate(&s, &hs, RiderOrder::ABC, &cfg).unwrap();
        let t_even = simulate(&s, &even, RiderOrder::ABC, &cfg).unwrap();
        assert!(t_even.feasible);
        assert!(
            t_even.total_time > t_hs.total_time,
            "{} vs {}",
            t_even.total_time,
            t_hs.total_time
        );
    }
}
