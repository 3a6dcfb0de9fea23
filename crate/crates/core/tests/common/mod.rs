#![allow(dead_code)]

use pursuit::encoding::{PowerProfile, TrackGeometry, TransitionStrategy};
use pursuit::simulator::penalized_fitness;
use pursuit::{RaceConfig, RiderOrder};

/// Two laps with the first leader riding the whole race, so only one power
/// entry is live. Energy is cut to 15 kJ per rider so the budget binds.
pub fn toy_race() -> (RaceConfig, TransitionStrategy) {
    let mut cfg = RaceConfig::default();
    cfg.geometry = TrackGeometry::new(250.0, 2).unwrap();
    for r in cfg.riders.iter_mut() {
        r.available_energy = 15_000.0;
    }
    let strategy = TransitionStrategy::new(vec![3, 1, 1], cfg.max_hl).unwrap();
    assert_eq!(strategy.effective_length(), 1);
    (cfg, strategy)
}

/// Best penalized fitness over 100..=1000 W in 1 W steps.
pub fn toy_grid_optimum(cfg: &RaceConfig, strategy: &TransitionStrategy) -> (f64, f64) {
    (100..=1000)
        .map(|p| {
            let profile = PowerProfile(vec![p as f64; strategy.len()]);
            let f = penalized_fitness(strategy, &profile, RiderOrder::ABC, cfg).unwrap();
            (f, p as f64)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

pub fn high_start_profile() -> PowerProfile {
    let mut p = vec![364.0; 23];
    p[0] = 900.0;
    PowerProfile(p)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
