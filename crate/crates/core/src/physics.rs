//! Cycling power model for a rider leading the team and for riders drafting
//! behind.
//!
//! The leader's kinetic-energy balance over a time step `dt` is
//!
//! ```text
//! dKE = (P*E - CdA * (rho*v^3/2) - mu * v * F_N) * dt
//! ```
//!
//! and a follower holding the leader's speed needs
//!
//! ```text
//! P = (CdA * C_draft * rho*v^3/2 + mu * v * F_N + dKE/dt) / E
//! ```
//!
//! where `F_N = (rider mass + bike mass) * g` and `dKE` is the follower's own
//! kinetic-energy change. Potential energy is ignored (flat track, still air).
//!
//! # Air density
//!
//! Air density is derived from temperature `T` (deg C), pressure `p` (hPa) and
//! relative humidity `RH` using the ideal-gas law for a mixture of dry air and
//! water vapour:
//!
//! ```text
//! e_s  = 6.1094 * exp(17.625 * T / (T + 243.04))      saturation pressure, hPa (Magnus)
//! p_v  = RH * e_s * 100                                vapour partial pressure, Pa
//! p_d  = p * 100 - p_v                                 dry-air partial pressure, Pa
//! rho  = p_d / (R_d * T_K) + p_v / (R_v * T_K)
//! ```
//!
//! with `T_K = T + 273.15`, `R_d = 287.058 J/(kg K)` and `R_v = 461.495 J/(kg K)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Specific gas constant of dry air, J/(kg K).
pub const R_DRY_AIR: f64 = 287.058;
/// Specific gas constant of water vapour, J/(kg K).
pub const R_WATER_VAPOUR: f64 = 461.495;
const KELVIN_OFFSET: f64 = 273.15;
const MAGNUS_A_HPA: f64 = 6.1094;
const MAGNUS_B: f64 = 17.625;
const MAGNUS_C_DEG: f64 = 243.04;

/// Ambient conditions. The air density is cached and recomputed by every setter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    temperature: f64,
    air_pressure: f64,
    relative_humidity: f64,
    gravity: f64,
    air_density: f64,
}

impl Environment {
    pub fn new(temperature: f64, air_pressure: f64, relative_humidity: f64, gravity: f64) -> Result<Self> {
        if !gravity.is_finite() || gravity <= 0.0 {
            return Err(Error::invalid("gravity", format!("must be > 0, got {gravity}")));
        }
        let air_density = humid_air_density(temperature, air_pressure, relative_humidity)?;
        Ok(Self {
            temperature,
            air_pressure,
            relative_humidity,
            gravity,
            air_density,
        })
    }

    /// Degrees Celsius.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// hPa.
    pub fn air_pressure(&self) -> f64 {
        self.air_pressure
    }

    pub fn relative_humidity(&self) -> f64 {
        self.relative_humidity
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// kg/m³, derived from temperature, pressure and humidity.
    pub fn air_density(&self) -> f64 {
        self.air_density
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        *self = Self::new(temperature, self.air_pressure, self.relative_humidity, self.gravity)?;
        Ok(())
    }

    pub fn set_air_pressure(&mut self, air_pressure: f64) -> Result<()> {
        *self = Self::new(self.temperature, air_pressure, self.relative_humidity, self.gravity)?;
        Ok(())
    }

    pub fn set_relative_humidity(&mut self, relative_humidity: f64) -> Result<()> {
        *self = Self::new(self.temperature, self.air_pressure, relative_humidity, self.gravity)?;
        Ok(())
    }

    pub fn set_gravity(&mut self, gravity: f64) -> Result<()> {
        *self = Self::new(self.temperature, self.air_pressure, self.relative_humidity, gravity)?;
        Ok(())
    }
}

impl Default for Environment {
    /// 20 °C, 1013.25 hPa, 50 % humidity, standard gravity.
    fn default() -> Self {
        Self::new(20.0, 1013.25, 0.5, 9.80665).expect("default environment is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiderParams {
    /// kg
    pub mass: f64,
    /// Effective frontal drag area C_D·A, m².
    pub cda: f64,
    /// J
    pub available_energy: f64,
}

impl RiderParams {
    pub fn new(mass: f64, cda: f64, available_energy: f64) -> Result<Self> {
        let params = Self {
            mass,
            cda,
            available_energy,
        };
        params.validate("rider")?;
        Ok(params)
    }

    /// Energy budget approximated as mass × 5 W/kg sustained for 210 s.
    pub fn with_default_energy(mass: f64, cda: f64) -> Result<Self> {
        Self::new(mass, cda, default_energy_budget(mass))
    }

    pub(crate) fn validate(&self, prefix: &str) -> Result<()> {
        positive(&format!("{prefix}.mass"), self.mass)?;
        positive(&format!("{prefix}.cda"), self.cda)?;
        positive(&format!("{prefix}.available_energy"), self.available_energy)
    }
}

/// mass × 5 W/kg × 210 s.
pub fn default_energy_budget(mass: f64) -> f64 {
    mass * 5.0 * 210.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BikeParams {
    /// kg
    pub mass: f64,
}

impl BikeParams {
    pub fn new(mass: f64) -> Result<Self> {
        positive("bike.mass", mass)?;
        Ok(Self { mass })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub mechanical_efficiency: f64,
    pub global_friction: f64,
    pub draft_coefficient_second: f64,
    pub draft_coefficient_third: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl ModelConstants {
    pub fn validate(&self) -> Result<()> {
        let e = self.mechanical_efficiency;
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::invalid(
                "constants.mechanical_efficiency",
                format!("must be in (0, 1], got {e}"),
            ));
        }
        if !(self.global_friction >= 0.0 && self.global_friction.is_finite()) {
            return Err(Error::invalid(
                "constants.global_friction",
                format!("must be >= 0, got {}", self.global_friction),
            ));
        }
        for (field, c) in [
            ("constants.draft_coefficient_second", self.draft_coefficient_second),
            ("constants.draft_coefficient_third", self.draft_coefficient_third),
        ] {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid(field, format!("must be in (0, 1], got {c}")));
            }
        }
        positive("constants.dt", self.dt)
    }

    /// Copy with a different step length, used for partial steps.
    pub fn with_dt(self, dt: f64) -> Self {
        Self { dt, ..self }
    }
}

impl Default for ModelConstants {
    fn default() -> Self {
        Self {
            mechanical_efficiency: 0.977,
            global_friction: 0.0025,
            draft_coefficient_second: 0.7,
            draft_coefficient_third: 0.6,
            dt: 0.1,
        }
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

fn humid_air_density(temperature: f64, air_pressure: f64, relative_humidity: f64) -> Result<f64> {
    if !air_pressure.is_finite() || air_pressure <= 0.0 {
        return Err(Error::invalid(
            "environment.air_pressure",
            format!("must be > 0 hPa, got {air_pressure}"),
        ));
    }
    if !(0.0..=1.0).contains(&relative_humidity) {
        return Err(Error::invalid(
            "environment.relative_humidity",
            format!("must be in [0, 1], got {relative_humidity}"),
        ));
    }
    let kelvin = temperature + KELVIN_OFFSET;
    if !kelvin.is_finite() || kelvin <= 0.0 {
        return Err(Error::invalid(
            "environment.temperature",
            format!("must be above absolute zero, got {temperature}"),
        ));
    }
    let saturation_hpa = MAGNUS_A_HPA * (MAGNUS_B * temperature / (temperature + MAGNUS_C_DEG)).exp();
    let vapour_pa = relative_humidity * saturation_hpa * 100.0;
    let dry_pa = air_pressure * 100.0 - vapour_pa;
    if dry_pa <= 0.0 {
        return Err(Error::invalid(
            "environment.air_pressure",
            "vapour pressure exceeds total pressure",
        ));
    }
    Ok(dry_pa / (R_DRY_AIR * kelvin) + vapour_pa / (R_WATER_VAPOUR * kelvin))
}

/// Air density of `env` in kg/m³.
pub fn air_density(env: &Environment) -> f64 {
    env.air_density()
}

fn normal_force(rider: &RiderParams, bike: &BikeParams, env: &Environment) -> f64 {
    (rider.mass + bike.mass) * env.gravity()
}

/// Kinetic energy gained by the leader over one step of `k.dt` seconds.
///
/// Negative values mean the resistive forces outweigh the pedalling power.
pub fn lead_delta_ke(
    power: f64,
    speed: f64,
    rider: &RiderParams,
    bike: &BikeParams,
    env: &Environment,
    k: &ModelConstants,
) -> f64 {
    let drag = rider.cda * (0.5 * env.air_density() * speed.powi(3));
    let friction = k.global_friction * (speed * normal_force(rider, bike, env));
    (power * k.mechanical_efficiency - drag - friction) * k.dt
}

/// Power a drafting rider must produce to hold the leader's speed while its own
/// kinetic energy changes by `delta_ke` over `k.dt`.
///
/// May be negative when the team decelerates; callers decide how to account for it.
pub fn follower_power(
    delta_ke: f64,
    speed: f64,
    rider: &RiderParams,
    bike: &BikeParams,
    draft_coeff: f64,
    env: &Environment,
    k: &ModelConstants,
) -> f64 {
    let drag = rider.cda * draft_coeff * 0.5 * env.air_density() * speed.powi(3);
    let friction = k.global_friction * (speed * normal_force(rider, bike, env));
    (drag + friction + delta_ke / k.dt) / k.mechanical_efficiency
}

/// Speed after adding `delta_ke` to a body of `total_mass` moving at `speed`.
/// Never negative: losing more than the available kinetic energy stops the body.
pub fn step_velocity(speed: f64, delta_ke: f64, total_mass: f64) -> f64 {
    let squared = speed * speed + 2.0 * delta_ke / total_mass;
    if squared > 0.0 {
        squared.sqrt()
    } else {
        0.0
    }
}

/// Kinetic energy change of `total_mass` going from `from` to `to` m/s.
pub fn kinetic_energy_change(total_mass: f64, from: f64, to: f64) -> f64 {
    0.5 * total_mass * (to * to - from * from)
}
