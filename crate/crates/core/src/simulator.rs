//! Forward-integration race simulation and the penalized fitness used by the
//! optimizers.
//!
//! Each live segment is ridden by the current leader at its commanded power.
//! The team's speed is integrated with a fixed step; when a segment boundary
//! falls inside a step, the last step is shortened to
//! `remaining distance / mean step velocity` and the end velocity is
//! interpolated linearly. Followers pay the drafting power needed to track the
//! shared velocity. Transitions add a fixed time and nothing else.

use std::fmt::Write as _;

use crate::encoding::{
    atomic_unit_count, segment_distances, PowerProfile, Rider, RiderOrder, TrackGeometry, TransitionStrategy,
};
use crate::error::{Error, Result};
use crate::physics::{
    follower_power, kinetic_energy_change, lead_delta_ke, step_velocity, BikeParams, Environment, ModelConstants,
    RiderParams,
};

/// Integration time after which a race that is not finished is abandoned as
/// infeasible. Only reachable with (near) zero power.
pub const STALL_TIME_LIMIT: f64 = 3600.0;

pub const TRACE_HEADER: &str = "time_s,distance_m,velocity_ms,leader,commanded_power_w,p1_w,p2_w,p3_w,e1_j,e2_j,e3_j";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// s, added once to any infeasible candidate.
    pub base_penalty: f64,
    /// s/J of final energy deficit summed over riders.
    pub energy_deficit_weight: f64,
    /// s/W of bound violation summed over live entries.
    pub power_violation_weight: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            base_penalty: 1000.0,
            energy_deficit_weight: 1.0,
            power_violation_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceConfig {
    pub environment: Environment,
    /// Indexed by [`Rider::index`].
    pub riders: [RiderParams; 3],
    pub bike: BikeParams,
    pub constants: ModelConstants,
    pub geometry: TrackGeometry,
    pub max_hl: u32,
    /// W
    pub power_min: f64,
    /// W
    pub power_max: f64,
    /// s
    pub transition_time: f64,
    pub penalty: PenaltyConfig,
}

impl Default for RaceConfig {
    /// Women's 3000 m team pursuit.
    fn default() -> Self {
        let rider = |mass, cda| RiderParams::with_default_energy(mass, cda).expect("valid rider");
        Self {
            environment: Environment::default(),
            riders: [rider(70.0, 0.190), rider(67.5, 0.175), rider(65.0, 0.160)],
            bike: BikeParams { mass: 8.0 },
            constants: ModelConstants::default(),
            geometry: TrackGeometry::default(),
            max_hl: 3,
            power_min: 100.0,
            power_max: 1000.0,
            transition_time: 0.12,
            penalty: PenaltyConfig::default(),
        }
    }
}

impl RaceConfig {
    pub fn rider(&self, rider: Rider) -> &RiderParams {
        &self.riders[rider.index()]
    }

    /// Drag multiplier for the rider at `position` (0 = leader).
    pub fn draft_coefficient(&self, position: usize) -> f64 {
        match position {
            0 => 1.0,
            1 => self.constants.draft_coefficient_second,
            _ => self.constants.draft_coefficient_third,
        }
    }

    /// Length of the decision vectors for this race.
    pub fn decision_len(&self) -> usize {
        atomic_unit_count(&self.geometry).expect("validated geometry")
    }

    pub fn validate(&self) -> Result<()> {
        for r in Rider::ALL {
            self.rider(r).validate(&format!("riders.{r}"))?;
        }
        if !(self.bike.mass.is_finite() && self.bike.mass > 0.0) {
            return Err(Error::invalid(
                "bike.mass",
                format!("must be > 0, got {}", self.bike.mass),
            ));
        }
        self.constants.validate()?;
        self.geometry.validate()?;
        if self.max_hl < 1 {
            return Err(Error::invalid("race.max_half_laps", "must be >= 1"));
        }
        if !(self.power_min.is_finite() && self.power_max.is_finite() && self.power_min < self.power_max) {
            return Err(Error::invalid(
                "race.power_min",
                format!("must be below power_max ({} >= {})", self.power_min, self.power_max),
            ));
        }
        if !(self.transition_time >= 0.0 && self.transition_time.is_finite()) {
            return Err(Error::invalid("race.transition_time", "must be >= 0"));
        }
        let p = &self.penalty;
        for (field, w) in [
            ("penalty.base_penalty", p.base_penalty),
            ("penalty.energy_deficit_weight", p.energy_deficit_weight),
            ("penalty.power_violation_weight", p.power_violation_weight),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(field, format!("must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

/// State after one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// Race clock including transition time, s.
    pub time: f64,
    /// m
    pub distance: f64,
    /// m/s
    pub velocity: f64,
    pub leader: Rider,
    /// The profile entry for the current segment, before clamping.
    pub commanded_power: f64,
    /// Power each rider spent during the step, indexed by rider.
    pub rider_powers: [f64; 3],
    /// Remaining energy after the step, indexed by rider.
    pub rider_energies: [f64; 3],
    /// Duration of the step that produced this sample, s. Zero for the start row.
    pub step_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceResult {
    pub total_time: f64,
    /// Indexed by rider.
    pub final_energies: [f64; 3],
    pub feasible: bool,
    /// False only if the team stalled before the line.
    pub finished: bool,
    pub segment_times: Vec<f64>,
    pub trace: Vec<TraceSample>,
}

impl RaceResult {
    pub fn final_energy(&self, rider: Rider) -> f64 {
        self.final_energies[rider.index()]
    }
}

/// A strategy and starting order validated against a config, ready to be
/// evaluated for many power profiles.
#[derive(Debug, Clone)]
pub struct PreparedRace<'a> {
    config: &'a RaceConfig,
    order: RiderOrder,
    segments: Vec<f64>,
    units: usize,
}

impl<'a> PreparedRace<'a> {
    pub fn new(strategy: &TransitionStrategy, order: RiderOrder, config: &'a RaceConfig) -> Result<Self> {
        let segments = segment_distances(strategy, &config.geometry)?;
        Ok(Self {
            config,
            order,
            segments,
            units: strategy.len(),
        })
    }

    /// Effective length `m`.
    pub fn live_len(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> &[f64] {
        &self.segments
    }

    pub fn config(&self) -> &RaceConfig {
        self.config
    }

    pub fn order(&self) -> RiderOrder {
        self.order
    }

    fn check_profile(&self, profile: &PowerProfile) -> Result<()> {
        if profile.len() != self.units {
            return Err(Error::LengthMismatch {
                what: "power profile",
                expected: self.units,
                actual: profile.len(),
            });
        }
        Ok(())
    }

    pub fn simulate(&self, profile: &PowerProfile) -> Result<RaceResult> {
        self.check_profile(profile)?;
        let mut trace = Vec::new();
        let mut result = self.run(&profile.0[..self.live_len()], Some(&mut trace));
        result.trace = trace;
        Ok(result)
    }

    pub fn penalized_fitness(&self, profile: &PowerProfile) -> Result<f64> {
        self.check_profile(profile)?;
        Ok(self.fitness_live(&profile.0[..self.live_len()]))
    }

    /// Penalized fitness of the live powers alone (`live.len()` must be `m`).
    pub fn fitness_live(&self, live: &[f64]) -> f64 {
        assert_eq!(live.len(), self.live_len(), "live power count");
        let result = self.run(live, None);
        let violation = power_violation(live, self.config.power_min, self.config.power_max);
        let deficit: f64 = result.final_energies.iter().map(|e| (-e).max(0.0)).sum();
        if result.feasible && violation == 0.0 {
            result.total_time
        } else {
            let p = &self.config.penalty;
            result.total_time
                + p.base_penalty
                + p.energy_deficit_weight * deficit
                + p.power_violation_weight * violation
        }
    }

    fn run(&self, live: &[f64], mut trace: Option<&mut Vec<TraceSample>>) -> RaceResult {
        let cfg = self.config;
        let env = &cfg.environment;
        let k = &cfg.constants;
        let dt = k.dt;
        let mut energies = cfg.riders.map(|r| r.available_energy);
        let mut order = self.order;
        let mut velocity = 0.0f64;
        let mut integration_time = 0.0f64;
        let mut clock = 0.0f64;
        let mut segment_start = 0.0f64;
        let mut segment_times = Vec::with_capacity(self.segments.len());
        let mut finished = true;

        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceSample {
                time: 0.0,
                distance: 0.0,
                velocity: 0.0,
                leader: order.leader(),
                commanded_power: live.first().copied().unwrap_or(0.0),
                rider_powers: [0.0; 3],
                rider_energies: energies,
                step_duration: 0.0,
            });
        }

        'segments: for (i, (&length, &commanded)) in self.segments.iter().zip(live).enumerate() {
            let power = commanded.max(0.0);
            let leader = order.leader();
            let lead = cfg.rider(leader);
            let lead_mass = lead.mass + cfg.bike.mass;
            let mut covered = 0.0f64;
            let mut segment_time = 0.0f64;

            loop {
                let delta_ke = lead_delta_ke(power, velocity, lead, &cfg.bike, env, k);
                let full_step = step_velocity(velocity, delta_ke, lead_mass);
                let mean = 0.5 * (velocity + full_step);
                let remaining = length - covered;
                let advance = mean * dt;
                let last = advance >= remaining;
                let (tau, next_velocity, dx) = if last {
                    let tau = remaining / mean;
                    (tau, velocity + (full_step - velocity) * (tau / dt), remaining)
                } else {
                    (dt, full_step, advance)
                };

                let mut powers = [0.0; 3];
                powers[leader.index()] = power;
                energies[leader.index()] -= power * tau;
                let step_k = k.with_dt(tau);
                for position in 1..3 {
                    let rider = order.at(position);
                    let params = cfg.rider(rider);
                    let own_ke = kinetic_energy_change(params.mass + cfg.bike.mass, velocity, next_velocity);
                    let p = follower_power(
                        own_ke,
                        velocity,
                        params,
                        &cfg.bike,
                        cfg.draft_coefficient(position),
                        env,
                        &step_k,
                    )
                    .max(0.0);
                    powers[rider.index()] = p;
                    energies[rider.index()] -= p * tau;
                }

                velocity = next_velocity;
                covered += dx;
                segment_time += tau;
                clock += tau;

                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceSample {
                        time: clock,
                        distance: if last {
                            segment_start + length
                        } else {
                            segment_start + covered
                        },
                        velocity,
                        leader,
                        commanded_power: commanded,
                        rider_powers: powers,
                        rider_energies: energies,
                        step_duration: tau,
                    });
                }
                if last {
                    break;
                }
                if integration_time + segment_time > STALL_TIME_LIMIT {
                    finished = false;
                    integration_time += segment_time;
                    segment_times.push(segment_time);
                    break 'segments;
                }
            }

            integration_time += segment_time;
            segment_times.push(segment_time);
            segment_start += length;
            if i + 1 < self.segments.len() {
                order = order.rotate();
                clock += cfg.transition_time;
            }
        }

        let transitions = segment_times.len().saturating_sub(1) as f64;
        let feasible = finished && energies.iter().all(|&e| e >= 0.0);
        RaceResult {
            total_time: integration_time + transitions * cfg.transition_time,
            final_energies: energies,
            feasible,
            finished,
            segment_times,
            trace: Vec::new(),
        }
    }
}

/// Total distance in W by which `powers` fall outside `[min, max]`.
pub fn power_violation(powers: &[f64], min: f64, max: f64) -> f64 {
    powers.iter().map(|&p| (min - p).max(0.0) + (p - max).max(0.0)).sum()
}

/// Simulates the race with a full per-step trace.
pub fn simulate(
    strategy: &TransitionStrategy,
    profile: &PowerProfile,
    order: RiderOrder,
    config: &RaceConfig,
) -> Result<RaceResult> {
    PreparedRace::new(strategy, order, config)?.simulate(profile)
}

/// Race time, plus penalties when a rider runs out of energy or a live power
/// leaves `[power_min, power_max]`.
pub fn penalized_fitness(
    strategy: &TransitionStrategy,
    profile: &PowerProfile,
    order: RiderOrder,
    config: &RaceConfig,
) -> Result<f64> {
    PreparedRace::new(strategy, order, config)?.penalized_fitness(profile)
}

/// One row per trace sample under [`TRACE_HEADER`]. Rider columns are A, B, C.
pub fn velocity_trace_csv(result: &RaceResult) -> String {
    let mut out = String::with_capacity(64 * (result.trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in &result.trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.time,
            s.distance,
            s.velocity,
            s.leader,
            s.commanded_power,
            s.rider_powers[0],
            s.rider_powers[1],
            s.rider_powers[2],
            s.rider_energies[0],
            s.rider_energies[1],
            s.rider_energies[2],
        );
    }
    out
}
