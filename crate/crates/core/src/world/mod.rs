//! Node movement, connectivity and the simplified link layer.

pub mod channel;
pub mod link;
pub mod mobility;

pub use channel::{airtime, neighbors_in_range, Arena, InterferenceMode, LinkLayerConfig, Point};
pub use link::{Dest, Frame, InterfaceQueue, ReceiverState};
pub use mobility::{MobilityState, Phase, SpeedInterval};
