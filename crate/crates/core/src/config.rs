//! Race configuration files.
//!
//! TOML; every key is optional and falls back to the women's team pursuit
//! defaults. Unknown keys are rejected.
//!
//! ```toml
//! [environment]
//! temperature = 20.0          # deg C
//! air_pressure = 1013.25      # hPa
//! relative_humidity = 0.5     # fraction
//! gravity = 9.80665           # m/s^2
//!
//! [riders.A]                  # also riders.B, riders.C
//! mass = 70.0                 # kg
//! cda = 0.190                 # m^2
//! available_energy = 73500.0  # J, defaults to mass * 5 * 210
//!
//! [bike]
//! mass = 8.0
//!
//! [constants]
//! mechanical_efficiency = 0.977
//! global_friction = 0.0025
//! draft_coefficient_second = 0.7
//! draft_coefficient_third = 0.6
//! dt = 0.1                    # s
//!
//! [track]
//! lap_length = 250.0          # m
//! laps = 12
//!
//! [race]
//! max_half_laps = 3
//! power_min = 100.0           # W
//! power_max = 1000.0          # W
//! transition_time = 0.12      # s
//!
//! [penalty]
//! base_penalty = 1000.0           # s
//! energy_deficit_weight = 1.0     # s/J
//! power_violation_weight = 1.0    # s/W
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::Rider;
use crate::error::{Error, Result};
use crate::physics::{default_energy_budget, Environment, RiderParams};
use crate::simulator::RaceConfig;

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    environment: EnvironmentSection,
    #[serde(default)]
    riders: RidersSection,
    #[serde(default)]
    bike: BikeSection,
    #[serde(default)]
    constants: ConstantsSection,
    #[serde(default)]
    track: TrackSection,
    #[serde(default)]
    race: RaceSection,
    #[serde(default)]
    penalty: PenaltySection,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentSection {
    temperature: Option<f64>,
    air_pressure: Option<f64>,
    relative_humidity: Option<f64>,
    gravity: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RidersSection {
    #[serde(rename = "A")]
    a: Option<RiderSection>,
    #[serde(rename = "B")]
    b: Option<RiderSection>,
    #[serde(rename = "C")]
    c: Option<RiderSection>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RiderSection {
    mass: Option<f64>,
    cda: Option<f64>,
    available_energy: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BikeSection {
    mass: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsSection {
    mechanical_efficiency: Option<f64>,
    global_friction: Option<f64>,
    draft_coefficient_second: Option<f64>,
    draft_coefficient_third: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackSection {
    lap_length: Option<f64>,
    laps: Option<u32>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RaceSection {
    max_half_laps: Option<u32>,
    power_min: Option<f64>,
    power_max: Option<f64>,
    transition_time: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PenaltySection {
    base_penalty: Option<f64>,
    energy_deficit_weight: Option<f64>,
    power_violation_weight: Option<f64>,
}

/// Parses a config document; missing keys take the defaults.
pub fn parse_config(text: &str, origin: &Path) -> Result<RaceConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|source| Error::ConfigParse {
        path: origin.to_path_buf(),
        source,
    })?;
    resolve(file)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RaceConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

fn resolve(file: ConfigFile) -> Result<RaceConfig> {
    let mut cfg = RaceConfig::default();

    let env = &file.environment;
    cfg.environment = Environment::new(
        env.temperature.unwrap_or(cfg.environment.temperature()),
        env.air_pressure.unwrap_or(cfg.environment.air_pressure()),
        env.relative_humidity.unwrap_or(cfg.environment.relative_humidity()),
        env.gravity.unwrap_or(cfg.environment.gravity()),
    )?;

    let sections = [&file.riders.a, &file.riders.b, &file.riders.c];
    for (rider, section) in Rider::ALL.into_iter().zip(sections) {
        let Some(section) = section else { continue };
        let current = cfg.riders[rider.index()];
        let mass = section.mass.unwrap_or(current.mass);
        let energy = section.available_energy.unwrap_or_else(|| default_energy_budget(mass));
        cfg.riders[rider.index()] = RiderParams {
            mass,
            cda: section.cda.unwrap_or(current.cda),
            available_energy: energy,
        };
    }

    if let Some(mass) = file.bike.mass {
        cfg.bike.mass = mass;
    }

    let k = &file.constants;
    let c = &mut cfg.constants;
    c.mechanical_efficiency = k.mechanical_efficiency.unwrap_or(c.mechanical_efficiency);
    c.global_friction = k.global_friction.unwrap_or(c.global_friction);
    c.draft_coefficient_second = k.draft_coefficient_second.unwrap_or(c.draft_coefficient_second);
    c.draft_coefficient_third = k.draft_coefficient_third.unwrap_or(c.draft_coefficient_third);
    c.dt = k.dt.unwrap_or(c.dt);

    cfg.geometry.lap_length = file.track.lap_length.unwrap_or(cfg.geometry.lap_length);
    cfg.geometry.laps = file.track.laps.unwrap_or(cfg.geometry.laps);

    let r = &file.race;
    cfg.max_hl = r.max_half_laps.unwrap_or(cfg.max_hl);
    cfg.power_min = r.power_min.unwrap_or(cfg.power_min);
    cfg.power_max = r.power_max.unwrap_or(cfg.power_max);
    cfg.transition_time = r.transition_time.unwrap_or(cfg.transition_time);

    let p = &file.penalty;
    let pen = &mut cfg.penalty;
    pen.base_penalty = p.base_penalty.unwrap_or(pen.base_penalty);
    pen.energy_deficit_weight = p.energy_deficit_weight.unwrap_or(pen.energy_deficit_weight);
    pen.power_violation_weight = p.power_violation_weight.unwrap_or(pen.power_violation_weight);

    cfg.validate()?;
    Ok(cfg)
}

/// Every effective value of `config` as a config document.
pub fn config_to_toml(config: &RaceConfig) -> String {
    let rider = |r: Rider| {
        let p = config.rider(r);
        Some(RiderSection {
            mass: Some(p.mass),
            cda: Some(p.cda),
            available_energy: Some(p.available_energy),
        })
    };
    let file = ConfigFile {
        environment: EnvironmentSection {
            temperature: Some(config.environment.temperature()),
            air_pressure: Some(config.environment.air_pressure()),
            relative_humidity: Some(config.environment.relative_humidity()),
            gravity: Some(config.environment.gravity()),
        },
        riders: RidersSection {
            a: rider(Rider::A),
            b: rider(Rider::B),
            c: rider(Rider::C),
        },
        bike: BikeSection {
            mass: Some(config.bike.mass),
        },
        constants: ConstantsSection {
            mechanical_efficiency: Some(config.constants.mechanical_efficiency),
            global_friction: Some(config.constants.global_friction),
            draft_coefficient_second: Some(config.constants.draft_coefficient_second),
            draft_coefficient_third: Some(config.constants.draft_coefficient_third),
            dt: Some(config.constants.dt),
        },
        track: TrackSection {
            lap_length: Some(config.geometry.lap_length),
            laps: Some(config.geometry.laps),
        },
        race: RaceSection {
            max_half_laps: Some(config.max_hl),
            power_min: Some(config.power_min),
            power_max: Some(config.power_max),
            transition_time: Some(config.transition_time),
        },
        penalty: PenaltySection {
            base_penalty: Some(config.penalty.base_penalty),
            energy_deficit_weight: Some(config.penalty.energy_deficit_weight),
            power_violation_weight: Some(config.penalty.power_violation_weight),
        },
    };
    toml::to_string(&file).expect("config serializes")
}
