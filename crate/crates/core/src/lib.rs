//! Discrete-event simulator for source-routed MANET protocols.

pub mod dsr;
pub mod energy;
pub mod engine;
pub mod error;
pub mod mea_dsr;
pub mod metrics;
pub mod plot;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod traffic;
pub mod world;
