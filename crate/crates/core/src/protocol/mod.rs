//! Packet formats and per-node routing state shared by DSR and MEA-DSR.

pub mod agent;
pub mod cache;
pub mod packet;
pub mod tables;

pub use agent::{Action, Audit, DropCause, NodeCtx, Protocol, RoutingAgent, RoutingConfig, RoutingCore, Timer};
pub use cache::{CachePolicy, CachedRoute, RouteCache};
pub use packet::{
    contains_link, is_loop_free, DataPacket, FlowId, Link, NodeId, Packet, PacketKind, PacketSizes, Rerr, RouteRole,
    Rrep, Rreq,
};
pub use tables::{CandidateOutcome, RouteCandidate, RoutesTable, RreqStatus, RreqTable, RreqTableEntry, SendBuffer};
