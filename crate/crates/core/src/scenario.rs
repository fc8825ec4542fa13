//! Scenario files and the sweep suites.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsr::DsrConfig;
use crate::energy::EnergyModel;
use crate::engine::SimDuration;
use crate::error::ScenarioError;
use crate::mea_dsr::MeaDsrConfig;
use crate::protocol::{PacketSizes, Protocol, RoutingConfig};
use crate::world::{Arena, LinkLayerConfig, SpeedInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedClass {
    Low,
    Moderate,
    High,
}

impl SpeedClass {
    pub const ALL: [SpeedClass; 3] = [SpeedClass::Low, SpeedClass::Moderate, SpeedClass::High];

    pub fn interval(self) -> SpeedInterval {
        match self {
            SpeedClass::Low => SpeedInterval::new(0.5, 1.0),
            SpeedClass::Moderate => SpeedInterval::new(5.0, 10.0),
            SpeedClass::High => SpeedInterval::new(20.0, 25.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpeedClass::Low => "low",
            SpeedClass::Moderate => "moderate",
            SpeedClass::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Speed {
    Class(SpeedClass),
    /// `[lo, hi]` in m/s
    Interval([f64; 2]),
}

impl Speed {
    pub fn interval(self) -> SpeedInterval {
        match self {
            Speed::Class(c) => c.interval(),
            Speed::Interval([lo, hi]) => SpeedInterval::new(lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    /// seconds
    pub pause_time: f64,
    pub speed: Speed,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig { pause_time: 100.0, speed: Speed::Class(SpeedClass::Moderate) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub sessions: usize,
    /// packets per second
    pub rate: u32,
    /// bytes
    pub payload: u32,
    /// session starts are uniform in `[0, start_window]` seconds
    pub start_window: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig { sessions: 10, rate: 4, payload: 512, start_window: 120.0 }
    }
}

/// Route discovery and buffering timers, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingSettings {
    pub send_buffer_timeout: f64,
    pub backoff_initial: f64,
    pub backoff_max: f64,
}

impl Default for RoutingSettings {
    fn default() -> Self {
        RoutingSettings { send_buffer_timeout: 30.0, backoff_initial: 0.5, backoff_max: 10.0 }
    }
}

impl RoutingSettings {
    pub fn config(&self) -> RoutingConfig {
        RoutingConfig {
            send_buffer_timeout: SimDuration::from_secs_f64(self.send_buffer_timeout),
            backoff_initial: SimDuration::from_secs_f64(self.backoff_initial),
            backoff_max: SimDuration::from_secs_f64(self.backoff_max),
            battery_field: false,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub nodes: usize,
    pub protocol: Protocol,
    /// seconds
    pub run_length: f64,
    pub seeds: Vec<u64>,
    pub arena: Arena,
    pub mobility: MobilityConfig,
    pub traffic: TrafficConfig,
    pub energy: EnergyModel,
    pub link: LinkLayerConfig,
    pub packet_sizes: PacketSizes,
    pub routing: RoutingSettings,
    pub dsr: DsrConfig,
    pub mea: MeaDsrConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "default".into(),
            nodes: 50,
            protocol: Protocol::MeaDsr,
            run_length: 600.0,
            seeds: default_seeds(),
            arena: Arena::default(),
            mobility: MobilityConfig::default(),
            traffic: TrafficConfig::default(),
            energy: EnergyModel::default(),
            link: LinkLayerConfig::default(),
            packet_sizes: PacketSizes::default(),
            routing: RoutingSettings::default(),
            dsr: DsrConfig::default(),
            mea: MeaDsrConfig::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!("{name} must be non-negative, got {v}")))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let value: toml::Value = toml::from_str(text).map_err(|e| ScenarioError::Malformed(e.message().to_string()))?;
        let mut unknown = Vec::new();
        let parsed: Result<Scenario, _> = serde_ignored::deserialize(value, |path| unknown.push(path.to_string()));
        let scenario = parsed.map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            match msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
                Some(key) => ScenarioError::UnknownKey(key.to_string()),
                None => ScenarioError::Malformed(msg),
            }
        })?;
        if let Some(key) = unknown.into_iter().next() {
            return Err(ScenarioError::UnknownKey(key));
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
        let mut s = Scenario::from_toml_str(&text)?;
        if s.name.is_empty() || s.name == "default" {
            if let Some(stem) = path.file_stem() {
                s.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.nodes < 2 {
            return Err(ScenarioError::Invalid(format!("nodes must be at least 2, got {}", self.nodes)));
        }
        if self.nodes > u32::MAX as usize {
            return Err(ScenarioError::Invalid("too many nodes".into()));
        }
        positive("run_length", self.run_length)?;
        if self.seeds.is_empty() {
            return Err(ScenarioError::Invalid("seeds must not be empty".into()));
        }
        positive("arena.width", self.arena.width)?;
        positive("arena.height", self.arena.height)?;
        positive("arena.tx_range", self.arena.tx_range)?;
        non_negative("mobility.pause_time", self.mobility.pause_time)?;
        let v = self.mobility.speed.interval();
        positive("mobility.speed lower bound", v.lo)?;
        if !(v.hi.is_finite() && v.lo <= v.hi) {
            return Err(ScenarioError::Invalid(format!("mobility.speed interval [{}, {}] is empty", v.lo, v.hi)));
        }
        if self.traffic.rate == 0 {
            return Err(ScenarioError::Invalid("traffic.rate must be positive".into()));
        }
        if self.traffic.payload == 0 {
            return Err(ScenarioError::Invalid("traffic.payload must be positive".into()));
        }
        non_negative("traffic.start_window", self.traffic.start_window)?;
        self.energy.validate().map_err(ScenarioError::Invalid)?;
        self.link.validate().map_err(ScenarioError::Invalid)?;
        self.mea.validate().map_err(ScenarioError::Invalid)?;
        if self.dsr.max_routes_per_dst == 0 {
            return Err(ScenarioError::Invalid("dsr.max_routes_per_dst must be at least 1".into()));
        }
        positive("routing.send_buffer_timeout", self.routing.send_buffer_timeout)?;
        positive("routing.backoff_initial", self.routing.backoff_initial)?;
        positive("routing.backoff_max", self.routing.backoff_max)?;
        if self.routing.backoff_initial > self.routing.backoff_max {
            return Err(ScenarioError::Invalid("routing.backoff_initial exceeds routing.backoff_max".into()));
        }
        Ok(())
    }

    /// Shrinks arena, node count, run length, pause time and the session
    /// start window by `factor`. Range, speeds and rates are kept.
    pub fn scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        s.arena.width *= factor;
        s.arena.height *= factor;
        s.nodes = ((self.nodes as f64 * factor).round() as usize).max(2);
        s.run_length *= factor;
        s.mobility.pause_time *= factor;
        s.traffic.start_window *= factor;
        s
    }

    pub fn with_protocol(&self, protocol: Protocol) -> Scenario {
        Scenario { protocol, ..self.clone() }
    }

    /// Digest of everything except the seed list.
    pub fn config_hash(&self) -> String {
        let canonical = Scenario { seeds: Vec::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Mobility,
    Density,
    Rate,
    Sessions,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::Mobility, Axis::Density, Axis::Rate, Axis::Sessions];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Mobility => "mobility",
            Axis::Density => "density",
            Axis::Rate => "rate",
            Axis::Sessions => "sessions",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        Some(match s {
            "mobility" | "mobility-pause" | "pause" => Axis::Mobility,
            "density" | "node-density" | "nodes" => Axis::Density,
            "rate" | "send-rate" | "traffic" => Axis::Rate,
            "sessions" | "session-count" => Axis::Sessions,
            _ => return None,
        })
    }

    /// Label for the x axis of charts.
    pub fn x_label(self) -> &'static str {
        match self {
            Axis::Mobility => "pause time (s)",
            Axis::Density => "nodes",
            Axis::Rate => "send rate (pkt/s)",
            Axis::Sessions => "sessions",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuitePoint {
    pub label: String,
    /// Panel within the axis; the speed class for the mobility sweep.
    pub series: String,
    /// Position along the axis (pause time, nodes, rate or sessions).
    pub x: f64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSuite {
    pub axis: Axis,
    pub scale: f64,
    pub points: Vec<SuitePoint>,
}

pub const PAUSE_POINTS: [f64; 7] = [0.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0];
pub const DENSITY_POINTS: [usize; 6] = [50, 60, 70, 80, 90, 100];
pub const RATE_POINTS: [u32; 6] = [2, 4, 6, 8, 10, 12];
pub const SESSION_POINTS: [usize; 7] = [10, 15, 20, 25, 30, 35, 40];

/// Points of one sweep, built from `base` at full size and then scaled.
pub fn build_suite(axis: Axis, base: &Scenario, scale: f64) -> SweepSuite {
    let mut points = Vec::new();
    let mut push = |label: String, series: &str, full: Scenario| {
        let scenario = Scenario { name: label.clone(), ..full.scaled(scale) };
        let x = match axis {
            Axis::Mobility => scenario.mobility.pause_time,
            Axis::Density => scenario.nodes as f64,
            Axis::Rate => scenario.traffic.rate as f64,
            Axis::Sessions => scenario.traffic.sessions as f64,
        };
        points.push(SuitePoint { label, series: series.to_string(), x, scenario });
    };
    match axis {
        Axis::Mobility => {
            for class in SpeedClass::ALL {
                for pause in PAUSE_POINTS {
                    let mut s = base.clone();
                    s.nodes = 50;
                    s.mobility = MobilityConfig { pause_time: pause, speed: Speed::Class(class) };
                    s.traffic.rate = 4;
                    s.traffic.sessions = 10;
                    push(format!("mobility-{}-p{}", class.as_str(), pause), class.as_str(), s);
                }
            }
        }
        Axis::Density => {
            for nodes in DENSITY_POINTS {
                let mut s = base.clone();
                s.nodes = nodes;
                s.mobility = MobilityConfig { pause_time: 100.0, speed: Speed::Class(SpeedClass::Moderate) };
                push(format!("density-n{nodes}"), "all", s);
            }
        }
        Axis::Rate => {
            for rate in RATE_POINTS {
                let mut s = base.clone();
                s.traffic.rate = rate;
                s.traffic.sessions = 10;
                push(format!("rate-r{rate}"), "all", s);
            }
        }
        Axis::Sessions => {
            for sessions in SESSION_POINTS {
                let mut s = base.clone();
                s.traffic.sessions = sessions;
                s.traffic.rate = 4;
                push(format!("sessions-s{sessions}"), "all", s);
            }
        }
    }
    SweepSuite { axis, scale, points }
}

/// Sweep from the documented defaults.
pub fn build_table1_suite(axis: Axis, scale: f64) -> SweepSuite {
    build_suite(axis, &Scenario::default(), scale)
}
