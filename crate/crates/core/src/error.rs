use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimTime;
use crate::protocol::NodeId;

/// Faults that abort a simulation run. Modelled network failures (loss,
/// collisions, broken links) are outcomes, not errors.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("event scheduled at {at} which is before the current clock {now}")]
    EventInPast { at: SimTime, now: SimTime },
    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("packet size must be positive")]
    ZeroSizePacket,
    #[error("node {node} received a source-routed packet whose cursor points at {expected}")]
    CursorMismatch { node: NodeId, expected: NodeId },
    #[error("route {0:?} contains a loop")]
    LoopedRoute(Vec<NodeId>),
    #[error("routes do not share endpoints")]
    EndpointMismatch,
    #[error("empty candidate set")]
    NoCandidates,
    #[error("node pool of {0} is too small to form a session")]
    PoolTooSmall(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario file: {0}")]
    Malformed(String),
    #[error("unknown key `{0}` in scenario file")]
    UnknownKey(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("run aborted for scenario `{scenario}` protocol {protocol} seed {seed}: {source}")]
    RunAborted {
        scenario: String,
        protocol: String,
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("no results to report")]
    Empty,
}
