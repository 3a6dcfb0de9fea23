//! Outer search over transition strategies: random local search and a (1+1)
//! EA. Each candidate strategy is scored by a [`StrategyFitness`]; the default
//! [`BilevelFitness`] runs CMA-ES on the power profile and reports the best
//! race time it finds.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::encoding::{PowerProfile, RiderOrder, TransitionStrategy};
use crate::error::Result;
use crate::power_optimizer::{default_power, optimize_powers_cmaes, CmaConfig};
use crate::simulator::RaceConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySolution {
    pub strategy: TransitionStrategy,
    /// Full-length profile; entries past the live prefix hold the default power.
    pub profile: PowerProfile,
    pub fitness: f64,
    pub order: RiderOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Maximum outer fitness evaluations; `None` lets RLS run until it reaches
    /// a local optimum.
    pub outer_budget: Option<usize>,
    pub inner: CmaConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            outer_budget: Some(100),
            inner: CmaConfig::default(),
            seed: 0,
        }
    }
}

/// Scores a strategy, given the incumbent's power profile as a starting point.
pub trait StrategyFitness {
    fn evaluate(
        &mut self,
        strategy: &TransitionStrategy,
        order: RiderOrder,
        incumbent_profile: &PowerProfile,
    ) -> Result<(f64, PowerProfile)>;
}

impl<F> StrategyFitness for F
where
    F: FnMut(&TransitionStrategy, RiderOrder, &PowerProfile) -> Result<(f64, PowerProfile)>,
{
    fn evaluate(
        &mut self,
        strategy: &TransitionStrategy,
        order: RiderOrder,
        incumbent_profile: &PowerProfile,
    ) -> Result<(f64, PowerProfile)> {
        self(strategy, order, incumbent_profile)
    }
}

/// Optimized race time of `strategy`: CMA-ES started from `incumbent_profile`.
///
/// The incumbent's entries are inherited positionally. The returned profile
/// has every entry past the new live prefix reset to the default power, so
/// entries that become live under a later strategy start from that default.
pub fn bilevel_fitness(
    strategy: &TransitionStrategy,
    order: RiderOrder,
    incumbent_profile: &PowerProfile,
    config: &RaceConfig,
    inner: &CmaConfig,
) -> Result<(f64, PowerProfile)> {
    let result = optimize_powers_cmaes(strategy, order, incumbent_profile, config, inner)?;
    let m = strategy.effective_length();
    Ok((
        result.best_fitness,
        result.best_profile.with_tail(m, default_power(config)),
    ))
}

/// [`bilevel_fitness`] with a per-run cache keyed on the live strategy prefix
/// and order, and a distinct inner seed for every fresh CMA-ES run.
#[derive(Debug)]
pub struct BilevelFitness<'a> {
    config: &'a RaceConfig,
    inner: CmaConfig,
    cache: HashMap<(Vec<u32>, RiderOrder), (f64, PowerProfile)>,
    inner_runs: u64,
}

impl<'a> BilevelFitness<'a> {
    pub fn new(config: &'a RaceConfig, inner: CmaConfig) -> Self {
        Self {
            config,
            inner,
            cache: HashMap::new(),
            inner_runs: 0,
        }
    }

    /// Number of CMA-ES runs performed (cache misses).
    pub fn inner_runs(&self) -> u64 {
        self.inner_runs
    }
}

impl StrategyFitness for BilevelFitness<'_> {
    fn evaluate(
        &mut self,
        strategy: &TransitionStrategy,
        order: RiderOrder,
        incumbent_profile: &PowerProfile,
    ) -> Result<(f64, PowerProfile)> {
        let key = (strategy.live().to_vec(), order);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let inner = CmaConfig {
            seed: crate::experiment::mix_seed(self.inner.seed, self.inner_runs),
            ..self.inner
        };
        self.inner_runs += 1;
        let value = bilevel_fitness(strategy, order, incumbent_profile, self.config, &inner)?;
        self.cache.insert(key, value.clone());
        Ok(value)
    }
}

/// Strategies one ±1 step away in a single live entry, staying within `[1, max_hl]`.
pub fn neighbors(strategy: &TransitionStrategy) -> Vec<TransitionStrategy> {
    let max_hl = strategy.max_hl();
    let mut out = Vec::with_capacity(2 * strategy.effective_length());
    for (i, &h) in strategy.live().iter().enumerate() {
        if h > 1 {
            out.push(strategy.with_entry(i, h - 1));
        }
        if h < max_hl {
            out.push(strategy.with_entry(i, h + 1));
        }
    }
    out
}

/// Each live entry is, with probability `1/m`, replaced by a uniformly chosen
/// different value in `[1, max_hl]`.
pub fn mutate<R: Rng + ?Sized>(strategy: &TransitionStrategy, rng: &mut R) -> TransitionStrategy {
    let m = strategy.effective_length();
    let max_hl = strategy.max_hl();
    let mut child = strategy.clone();
    if max_hl < 2 {
        return child;
    }
    let rate = 1.0 / m as f64;
    for (i, &h) in strategy.live().iter().enumerate() {
        if rng.gen_bool(rate) {
            // Uniform over the max_hl - 1 values other than h.
            let mut v = rng.gen_range(1..max_hl);
            if v >= h {
                v += 1;
            }
            child = child.with_entry(i, v);
        }
    }
    child
}

/// Uniformly random strategy of `len` entries.
pub fn random_strategy<R: Rng + ?Sized>(len: usize, max_hl: u32, rng: &mut R) -> Result<TransitionStrategy> {
    let hl = (0..len).map(|_| rng.gen_range(1..=max_hl)).collect();
    TransitionStrategy::new(hl, max_hl)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: StrategySolution,
    /// Outer fitness evaluations performed.
    pub evaluations: usize,
    /// Incumbent fitness after each evaluation.
    pub history: Vec<f64>,
    /// RLS only: stopped because no neighbour was accepted.
    pub local_optimum: bool,
}

/// Random local search: visit the incumbent's unseen neighbours in random
/// order and move to the first one that is at least as good.
pub fn rls<F, R>(start: StrategySolution, fitness: &mut F, budget: Option<usize>, rng: &mut R) -> Result<SearchOutcome>
where
    F: StrategyFitness + ?Sized,
    R: Rng + ?Sized,
{
    let mut incumbent = start;
    let mut evaluations = 0;
    let mut history = Vec::new();
    loop {
        let mut unseen = neighbors(&incumbent.strategy);
        unseen.shuffle(rng);
        let mut accepted = None;
        for candidate in unseen {
            if budget.is_some_and(|b| evaluations >= b) {
                return Ok(SearchOutcome {
                    best: incumbent,
                    evaluations,
                    history,
                    local_optimum: false,
                });
            }
            let (f, profile) = fitness.evaluate(&candidate, incumbent.order, &incumbent.profile)?;
            evaluations += 1;
            if f <= incumbent.fitness {
                accepted = Some(StrategySolution {
                    strategy: candidate,
                    profile,
                    fitness: f,
                    order: incumbent.order,
                });
            }
            history.push(accepted.as_ref().map_or(incumbent.fitness, |s| s.fitness));
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some(next) => incumbent = next,
            None => {
                return Ok(SearchOutcome {
                    best: incumbent,
                    evaluations,
                    history,
                    local_optimum: true,
                })
            }
        }
    }
}

/// (1+1) EA: mutate the incumbent, keep the offspring if it is at least as good.
pub fn simple_ea<F, R>(
    start: StrategySolution,
    fitness: &mut F,
    generations: usize,
    rng: &mut R,
) -> Result<SearchOutcome>
where
    F: StrategyFitness + ?Sized,
    R: Rng + ?Sized,
{
    let mut incumbent = start;
    let mut history = Vec::with_capacity(generations);
    for _ in 0..generations {
        let child = mutate(&incumbent.strategy, rng);
        let (f, profile) = fitness.evaluate(&child, incumbent.order, &incumbent.profile)?;
        if f <= incumbent.fitness {
            incumbent = StrategySolution {
                strategy: child,
                profile,
                fitness: f,
                order: incumbent.order,
            };
        }
        history.push(incumbent.fitness);
    }
    Ok(SearchOutcome {
        best: incumbent,
        evaluations: generations,
        history,
        local_optimum: false,
    })
}

/// Evaluates `strategy` from a fresh default-power profile.
pub fn evaluate_start<F>(
    strategy: TransitionStrategy,
    order: RiderOrder,
    config: &RaceConfig,
    fitness: &mut F,
) -> Result<StrategySolution>
where
    F: StrategyFitness + ?Sized,
{
    let init = PowerProfile::constant(default_power(config), strategy.len());
    let (f, profile) = fitness.evaluate(&strategy, order, &init)?;
    Ok(StrategySolution {
        strategy,
        profile,
        fitness: f,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{standard_strategy, TrackGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sum_fitness(s: &TransitionStrategy, _: RiderOrder, p: &PowerProfile) -> Result<(f64, PowerProfile)> {
        Ok((s.entries().iter().sum::<u32>() as f64, p.clone()))
    }

    fn start(hl: Vec<u32>) -> StrategySolution {
        let strategy = TransitionStrategy::new(hl, 3).unwrap();
        let fitness = strategy.entries().iter().sum::<u32>() as f64;
        StrategySolution {
            profile: PowerProfile::constant(400.0, strategy.len()),
            strategy,
            fitness,
            order: RiderOrder::ABC,
        }
    }

    #[test]
    fn neighbor_counts() {
        let g = TrackGeometry::default();
        let std = standard_strategy(&g, 3).unwrap();
        assert_eq!(neighbors(&std).len(), 23);
        let top = TransitionStrategy::new(vec![3; 23], 3).unwrap();
        let n = neighbors(&top);
        assert_eq!(n.len(), top.effective_length());
        assert!(n.iter().all(|s| s.entries().iter().sum::<u32>() == 68));
    }

    #[test]
    fn neighbors_differ_in_one_live_entry() {
        let s = TransitionStrategy::new(
            vec![1, 3, 2, 2, 1, 3, 3, 2, 1, 2, 3, 2, 2, 1, 1, 3, 2, 1, 1, 1, 2, 3, 1],
            3,
        )
        .unwrap();
        let m = s.effective_length();
        for n in neighbors(&s) {
            let diffs: Vec<usize> = (0..s.len()).filter(|&i| n.entries()[i] != s.entries()[i]).collect();
            assert_eq!(diffs.len(), 1);
            let i = diffs[0];
            assert!(i < m);
            assert_eq!(n.entries()[i].abs_diff(s.entries()[i]), 1);
        }
    }

    #[test]
    fn mutate_single_live_entry_always_changes() {
        // max_hl 23 lets one entry cover the whole race.
        let s = TransitionStrategy::new(vec![23; 23], 23).unwrap();
        assert_eq!(s.effective_length(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = mutate(&s, &mut rng);
            assert_ne!(c.entries()[0], 23);
            assert_eq!(&c.entries()[1..], &s.entries()[1..]);
        }
    }

    #[test]
    fn rls_descends_to_all_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut f = sum_fitness;
        let out = rls(start(vec![3; 23]), &mut f, None, &mut rng).unwrap();
        assert!(out.local_optimum);
        assert_eq!(out.best.strategy.entries(), &[1; 23]);
        assert_eq!(out.best.fitness, 23.0);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rls_stops_at_local_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut calls = 0;
        let mut f = |s: &TransitionStrategy, o: RiderOrder, p: &PowerProfile| {
            calls += 1;
            let (v, p) = sum_fitness(s, o, p)?;
            // Every neighbour of the start scores worse.
            Ok((v + 100.0, p))
        };
        let begin = start(vec![2; 23]);
        let n = neighbors(&begin.strategy).len();
        let out = rls(begin.clone(), &mut f, None, &mut rng).unwrap();
        assert!(out.local_optimum);
        assert_eq!(out.best, begin);
        assert_eq!(calls, n);
    }

    #[test]
    fn rls_respects_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut f = sum_fitness;
        let out = rls(start(vec![3; 23]), &mut f, Some(5), &mut rng).unwrap();
        assert_eq!(out.evaluations, 5);
        assert!(!out.local_optimum);
    }

    #[test]
    fn simple_ea_keeps_incumbent_on_worse_offspring() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = |_: &TransitionStrategy, _: RiderOrder, p: &PowerProfile| Ok((1e9, p.clone()));
        let begin = start(vec![2; 23]);
        let out = simple_ea(begin.clone(), &mut f, 1, &mut rng).unwrap();
        assert_eq!(out.best, begin);
    }

    #[test]
    fn simple_ea_is_monotone_and_reproducible() {
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = sum_fitness;
            simple_ea(start(vec![3; 23]), &mut f, 300, &mut rng).unwrap()
        };
        let a = run(6);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.best.fitness < 69.0);
        assert_eq!(a, run(6));
    }

    #[test]
    fn random_strategies_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let s = random_strategy(23, 3, &mut rng).unwrap();
            assert!(s.entries().iter().all(|&v| (1..=3).contains(&v)));
            assert!(s.live().iter().sum::<u32>() >= 23);
        }
    }
}
