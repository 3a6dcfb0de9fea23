//! Solution representation: transition strategies, power profiles and rider order.
//!
//! A race of `n` half-laps is split into `n - 1` atomic units. The first and
//! last units are 1.5 half-laps long (no transition can happen in the opening
//! 0.75 lap or the closing 0.75 lap); every other unit is one half-lap. Both
//! decision vectors are stored at the full length `n - 1`, but only the first
//! `m` entries are live, where `m` is the shortest prefix of half-lap counts
//! that covers all units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackGeometry {
    /// m
    pub lap_length: f64,
    pub laps: u32,
}

impl TrackGeometry {
    pub fn new(lap_length: f64, laps: u32) -> Result<Self> {
        let geometry = Self { lap_length, laps };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lap_length.is_finite() && self.lap_length > 0.0) {
            return Err(Error::invalid(
                "track.lap_length",
                format!("must be > 0, got {}", self.lap_length),
            ));
        }
        if self.half_laps() < 4 {
            return Err(Error::TrackTooShort {
                half_laps: self.half_laps(),
            });
        }
        Ok(())
    }

    pub fn race_distance(&self) -> f64 {
        self.lap_length * f64::from(self.laps)
    }

    pub fn half_lap_length(&self) -> f64 {
        self.lap_length / 2.0
    }

    pub fn half_laps(&self) -> u32 {
        2 * self.laps
    }

    /// Length of the decision vectors.
    pub fn atomic_unit_count(&self) -> Result<usize> {
        atomic_unit_count(self)
    }

    /// Distance covered by the atomic unit at `index`.
    pub fn unit_length(&self, index: usize, units: usize) -> f64 {
        if index == 0 || index + 1 == units {
            1.5 * self.half_lap_length()
        } else {
            self.half_lap_length()
        }
    }
}

impl Default for TrackGeometry {
    /// 12 laps of a 250 m velodrome.
    fn default() -> Self {
        Self {
            lap_length: 250.0,
            laps: 12,
        }
    }
}

/// `n - 2*1.5 + 2` atomic units for `n` half-laps.
pub fn atomic_unit_count(geometry: &TrackGeometry) -> Result<usize> {
    let half_laps = geometry.half_laps();
    if half_laps < 4 {
        return Err(Error::TrackTooShort { half_laps });
    }
    Ok(half_laps as usize - 1)
}

/// Half-lap counts each leader rides before handing over.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionStrategy {
    hl: Vec<u32>,
    max_hl: u32,
}

impl TransitionStrategy {
    pub fn new(hl: Vec<u32>, max_hl: u32) -> Result<Self> {
        if max_hl == 0 {
            return Err(Error::invalid("max_hl", "must be >= 1"));
        }
        if hl.is_empty() {
            return Err(Error::invalid("strategy", "must not be empty"));
        }
        if let Some((i, v)) = hl.iter().enumerate().find(|(_, &v)| v < 1 || v > max_hl) {
            return Err(Error::invalid(
                format!("strategy[{i}]"),
                format!("must be in [1, {max_hl}], got {v}"),
            ));
        }
        Ok(Self { hl, max_hl })
    }

    pub fn entries(&self) -> &[u32] {
        &self.hl
    }

    pub fn max_hl(&self) -> u32 {
        self.max_hl
    }

    /// Number of atomic units the strategy spans (`n - 1`).
    pub fn len(&self) -> usize {
        self.hl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hl.is_empty()
    }

    pub fn effective_length(&self) -> usize {
        effective_length(self)
    }

    /// The live prefix.
    pub fn live(&self) -> &[u32] {
        &self.hl[..self.effective_length()]
    }

    /// Copy with entry `index` replaced. `value` must lie in `[1, max_hl]`.
    pub fn with_entry(&self, index: usize, value: u32) -> Self {
        debug_assert!((1..=self.max_hl).contains(&value));
        let mut hl = self.hl.clone();
        hl[index] = value;
        Self {
            hl,
            max_hl: self.max_hl,
        }
    }
}

impl fmt::Display for TransitionStrategy {
    /// Live entries only, e.g. `[1, 2, 2]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.live())
    }
}

/// Smallest `m` such that the first `m` entries cover every atomic unit.
pub fn effective_length(strategy: &TransitionStrategy) -> usize {
    let units = strategy.len() as u64;
    let mut covered = 0u64;
    for (i, &h) in strategy.hl.iter().enumerate() {
        covered += u64::from(h);
        if covered >= units {
            return i + 1;
        }
    }
    strategy.len()
}

/// Lengths in metres of the live segments. The last segment is truncated so
/// the segments sum exactly to the race distance.
pub fn segment_distances(strategy: &TransitionStrategy, geometry: &TrackGeometry) -> Result<Vec<f64>> {
    let units = atomic_unit_count(geometry)?;
    if strategy.len() != units {
        return Err(Error::LengthMismatch {
            what: "strategy",
            expected: units,
            actual: strategy.len(),
        });
    }
    let mut next_unit = 0usize;
    let mut segments = Vec::with_capacity(strategy.effective_length());
    for &h in strategy.live() {
        let end = (next_unit + h as usize).min(units);
        let length: f64 = (next_unit..end).map(|u| geometry.unit_length(u, units)).sum();
        segments.push(length);
        next_unit = end;
    }
    Ok(segments)
}

/// Leader power per segment, W. Bounds are enforced by the fitness penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile(pub Vec<f64>);

impl PowerProfile {
    pub fn constant(power: f64, len: usize) -> Self {
        Self(vec![power; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Copy whose entries from `live` onwards are reset to `filler`.
    pub fn with_tail(&self, live: usize, filler: f64) -> Self {
        let mut p = self.0.clone();
        for v in p.iter_mut().skip(live) {
            *v = filler;
        }
        Self(p)
    }
}

/// Rider identity; also the index into per-rider arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rider {
    A,
    B,
    C,
}

impl Rider {
    pub const ALL: [Rider; 3] = [Rider::A, Rider::B, Rider::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Rider::A => 'A',
            Rider::B => 'B',
            Rider::C => 'C',
        }
    }
}

impl fmt::Display for Rider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Riders front to back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RiderOrder([Rider; 3]);

impl RiderOrder {
    pub const ABC: RiderOrder = RiderOrder([Rider::A, Rider::B, Rider::C]);

    pub fn new(order: [Rider; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for r in order {
            if std::mem::replace(&mut seen[r.index()], true) {
                let s: String = order.iter().map(|r| r.letter()).collect();
                return Err(Error::InvalidOrder(s));
            }
        }
        Ok(Self(order))
    }

    /// All six orders in lexicographic order (ABC, ACB, BAC, BCA, CAB, CBA).
    pub fn all() -> [RiderOrder; 6] {
        use Rider::*;
        [
            RiderOrder([A, B, C]),
            RiderOrder([A, C, B]),
            RiderOrder([B, A, C]),
            RiderOrder([B, C, A]),
            RiderOrder([C, A, B]),
            RiderOrder([C, B, A]),
        ]
    }

    pub fn riders(&self) -> [Rider; 3] {
        self.0
    }

    pub fn leader(&self) -> Rider {
        self.0[0]
    }

    /// Position 0 is the leader.
    pub fn at(&self, position: usize) -> Rider {
        self.0[position]
    }

    pub fn rotate(self) -> Self {
        rotate(self)
    }
}

/// The leader swings off and rejoins at the back.
pub fn rotate(order: RiderOrder) -> RiderOrder {
    let [first, second, third] = order.0;
    RiderOrder([second, third, first])
}

impl fmt::Display for RiderOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.0 {
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

impl FromStr for RiderOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidOrder(s.to_string());
        let letters: Vec<char> = s.trim().chars().collect();
        if letters.len() != 3 {
            return Err(bad());
        }
        let mut order = [Rider::A; 3];
        for (slot, c) in order.iter_mut().zip(letters) {
            *slot = match c.to_ascii_uppercase() {
                'A' => Rider::A,
                'B' => Rider::B,
                'C' => Rider::C,
                _ => return Err(bad()),
            };
        }
        RiderOrder::new(order).map_err(|_| bad())
    }
}

/// Filler for entries past the live prefix of the standard strategy.
pub const STANDARD_FILLER: u32 = 2;

/// Opening 0.75 lap, then a transition every lap: `[1, 2, 2, ..., 2]`.
pub fn standard_strategy(geometry: &TrackGeometry, max_hl: u32) -> Result<TransitionStrategy> {
    let units = atomic_unit_count(geometry)?;
    let mut hl = vec![STANDARD_FILLER; units];
    hl[0] = 1;
    TransitionStrategy::new(hl, max_hl)
}
