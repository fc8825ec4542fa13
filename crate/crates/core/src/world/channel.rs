//! Arena geometry, unit-disk connectivity and airtime.

use serde::{Deserialize, Serialize};

use crate::engine::{SimDuration, NANOS_PER_SEC};
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Point) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
    pub tx_range: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Arena { width: 1000.0, height: 1000.0, tx_range: 250.0 }
    }
}

impl Arena {
    pub fn new(width: f64, height: f64, tx_range: f64) -> Self {
        Arena { width, height, tx_range }
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point { x: p.x.clamp(0.0, self.width), y: p.y.clamp(0.0, self.height) }
    }

    /// Closed threshold: a node exactly at `tx_range` is reachable.
    pub fn in_range(&self, a: Point, b: Point) -> bool {
        a.distance_sq(b) <= self.tx_range * self.tx_range
    }
}

/// Indices of every other position within range of `positions[node]`.
pub fn neighbors_in_range(arena: &Arena, positions: &[Point], node: usize) -> Vec<usize> {
    let me = positions[node];
    positions
        .iter()
        .enumerate()
        .filter(|&(i, p)| i != node && arena.in_range(me, *p))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceMode {
    None,
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkLayerConfig {
    /// bits per second
    pub bandwidth: u64,
    pub queue_capacity: usize,
    pub mac_retries: u32,
    /// seconds
    pub broadcast_jitter_max: f64,
    pub interference: InterferenceMode,
    pub loss_probability: f64,
}

impl Default for LinkLayerConfig {
    fn default() -> Self {
        LinkLayerConfig {
            bandwidth: 2_000_000,
            queue_capacity: 50,
            mac_retries: 4,
            broadcast_jitter_max: 0.01,
            interference: InterferenceMode::Overlap,
            loss_probability: 0.0,
        }
    }
}

impl LinkLayerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.bandwidth == 0 {
            return Err("link.bandwidth must be positive".into());
        }
        if self.queue_capacity == 0 {
            return Err("link.queue_capacity must be at least 1".into());
        }
        if self.mac_retries == 0 {
            return Err("link.mac_retries must be at least 1".into());
        }
        if !(self.broadcast_jitter_max >= 0.0 && self.broadcast_jitter_max.is_finite()) {
            return Err("link.broadcast_jitter_max must be a non-negative number of seconds".into());
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err("link.loss_probability must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn airtime(&self, size: u32) -> Result<SimDuration, SimError> {
        airtime(size, self.bandwidth)
    }
}

/// `size * 8 / bandwidth`, rounded up to the next nanosecond.
pub fn airtime(size: u32, bandwidth: u64) -> Result<SimDuration, SimError> {
    if size == 0 {
        return Err(SimError::ZeroSizePacket);
    }
    let bits = size as u128 * 8 * NANOS_PER_SEC as u128;
    let bw = bandwidth as u128;
    Ok(SimDuration(bits.div_ceil(bw) as u64))
}
