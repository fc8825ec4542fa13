//! Random Waypoint mobility.

use serde::{Deserialize, Serialize};

use crate::engine::{RandomStream, SimDuration, SimTime};

use super::channel::{Arena, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SpeedInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        SpeedInterval { lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Paused { until: SimTime },
    Moving { departed: SimTime, arrives: SimTime },
}

/// Mobility state of one node. `position` is where the current phase began.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub position: Point,
    pub waypoint: Point,
    pub speed: f64,
    pub pause_time: SimDuration,
    pub speed_interval: SpeedInterval,
    pub phase: Phase,
}

impl MobilityState {
    /// Nodes start paused at their initial position, as ns-2's `setdest` does,
    /// so a pause that spans the run yields a static network.
    pub fn new(position: Point, pause_time: SimDuration, speed_interval: SpeedInterval) -> Self {
        MobilityState {
            position,
            waypoint: position,
            speed: 0.0,
            pause_time,
            speed_interval,
            phase: Phase::Paused { until: SimTime::ZERO + pause_time },
        }
    }

    pub fn is_paused(&self) -> bool {
        matches!(self.phase, Phase::Paused { .. })
    }

    /// Time of the next state change.
    pub fn next_change(&self) -> SimTime {
        match self.phase {
            Phase::Paused { until } => until,
            Phase::Moving { arrives, .. } => arrives,
        }
    }

    pub fn position_at(&self, t: SimTime) -> Point {
        match self.phase {
            Phase::Paused { .. } => self.position,
            Phase::Moving { departed, arrives } => {
                if t >= arrives {
                    return self.waypoint;
                }
                let dist = self.position.distance(self.waypoint);
                if dist == 0.0 {
                    return self.waypoint;
                }
                let travelled = (self.speed * t.saturating_since(departed).as_secs_f64()).min(dist);
                let f = travelled / dist;
                Point {
                    x: self.position.x + (self.waypoint.x - self.position.x) * f,
                    y: self.position.y + (self.waypoint.y - self.position.y) * f,
                }
            }
        }
    }

    /// Advances the state machine at `now` and returns the time of the next change.
    ///
    /// On arrival the node pauses for `pause_time`; when a pause ends it draws a
    /// uniform waypoint in the arena and a uniform speed from its interval. A zero
    /// pause goes straight from arrival into the next leg.
    pub fn rwp_step(&mut self, now: SimTime, arena: &Arena, rng: &mut RandomStream) -> SimTime {
        loop {
            match self.phase {
                Phase::Moving { arrives, .. } if now >= arrives => {
                    self.position = self.waypoint;
                    self.speed = 0.0;
                    self.phase = Phase::Paused { until: arrives + self.pause_time };
                }
                Phase::Paused { until } if now >= until => {
                    self.position = self.position_at(now);
                    self.waypoint = arena.clamp(Point {
                        x: rng.draw_uniform(0.0, arena.width).expect("arena width is positive"),
                        y: rng.draw_uniform(0.0, arena.height).expect("arena height is positive"),
                    });
                    self.speed = rng
                        .draw_uniform(self.speed_interval.lo, self.speed_interval.hi)
                        .expect("validated speed interval");
                    let leg = self.position.distance(self.waypoint) / self.speed;
                    let leg = SimDuration((leg * 1e9).ceil() as u64);
                    self.phase = Phase::Moving { departed: now, arrives: now + leg };
                }
                _ => return self.next_change(),
            }
        }
    }
}
