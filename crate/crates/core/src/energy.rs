//! Battery ledger. Only transmission and reception draw power; idle is free.
//!
//! Energy is an integer number of picojoules and power an integer number of
//! milliwatts, so `power * airtime_ns` is exact and conservation checks can
//! use zero tolerance.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::engine::SimDuration;

pub const PICOJOULES_PER_JOULE: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Energy(pub u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);
    /// Stand-in for "no constraint", e.g. the battery level of a path with no relays.
    pub const UNBOUNDED: Energy = Energy(u64::MAX);

    pub fn from_joules(j: f64) -> Self {
        assert!(j.is_finite() && j >= 0.0, "energy must be non-negative: {j}");
        Energy((j * PICOJOULES_PER_JOULE as f64).round() as u64)
    }

    pub fn picojoules(self) -> u64 {
        self.0
    }

    pub fn as_joules(self) -> f64 {
        self.0 as f64 / PICOJOULES_PER_JOULE as f64
    }

    pub fn is_unbounded(self) -> bool {
        self == Energy::UNBOUNDED
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unbounded() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyModel {
    /// joules per node at start
    pub initial: f64,
    /// watts
    pub tx_power: f64,
    /// watts
    pub rx_power: f64,
    pub overhear_charging: bool,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel { initial: 100.0, tx_power: 1.4, rx_power: 1.0, overhear_charging: false }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err("energy.initial must be positive".into());
        }
        if self.initial * PICOJOULES_PER_JOULE as f64 > u64::MAX as f64 / 1024.0 {
            return Err("energy.initial is too large".into());
        }
        for (name, w) in [("tx_power", self.tx_power), ("rx_power", self.rx_power)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(format!("energy.{name} must be positive"));
            }
            let mw = w * 1000.0;
            if (mw - mw.round()).abs() > 1e-9 {
                return Err(format!("energy.{name} must be a whole number of milliwatts"));
            }
        }
        Ok(())
    }

    pub fn tx_milliwatts(&self) -> u64 {
        (self.tx_power * 1000.0).round() as u64
    }

    pub fn rx_milliwatts(&self) -> u64 {
        (self.rx_power * 1000.0).round() as u64
    }

    /// Energy to transmit for `airtime` (mW x ns = pJ).
    pub fn tx_cost(&self, airtime: SimDuration) -> Energy {
        Energy(self.tx_milliwatts() * airtime.nanos())
    }

    pub fn rx_cost(&self, airtime: SimDuration) -> Energy {
        Energy(self.rx_milliwatts() * airtime.nanos())
    }
}

/// Outcome of a charge against one battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Charge {
    pub amount: Energy,
    /// The battery could not cover the full amount.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct EnergyLedger {
    initial: Vec<Energy>,
    consumed: Vec<Energy>,
}

impl EnergyLedger {
    pub fn new(nodes: usize, initial: Energy) -> Self {
        assert!(initial > Energy::ZERO, "initial energy must be positive");
        EnergyLedger { initial: vec![initial; nodes], consumed: vec![Energy::ZERO; nodes] }
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn initial(&self, node: usize) -> Energy {
        self.initial[node]
    }

    pub fn consumed(&self, node: usize) -> Energy {
        self.consumed[node]
    }

    pub fn residual(&self, node: usize) -> Energy {
        self.initial[node] - self.consumed[node]
    }

    pub fn is_alive(&self, node: usize) -> bool {
        self.residual(node) > Energy::ZERO
    }

    /// Draws up to `amount`; anything beyond the residual is truncated.
    pub fn charge(&mut self, node: usize, amount: Energy) -> Charge {
        let residual = self.residual(node);
        let taken = amount.min(residual);
        self.consumed[node] += taken;
        Charge { amount: taken, truncated: taken < amount }
    }

    pub fn residual_ratio(&self, node: usize) -> f64 {
        residual_ratio(self.residual(node), self.initial[node])
    }

    pub fn consumed_all(&self) -> &[Energy] {
        &self.consumed
    }

    pub fn initial_all(&self) -> &[Energy] {
        &self.initial
    }

    pub fn total_consumed(&self) -> u128 {
        self.consumed.iter().map(|e| e.0 as u128).sum()
    }
}

pub fn residual_ratio(residual: Energy, initial: Energy) -> f64 {
    residual.0 as f64 / initial.0 as f64
}
