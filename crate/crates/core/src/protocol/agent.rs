//! Interface between routing agents and the simulator, plus the discovery,
//! buffering and route-error plumbing both protocols share.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::Energy;
use crate::engine::{SimDuration, SimTime};
use crate::error::SimError;

use super::cache::{CachePolicy, RouteCache};
use super::packet::{DataPacket, Link, NodeId, Packet, Rerr, Rreq};
use super::tables::{RouteCandidate, RreqTable, SendBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "dsr")]
    Dsr,
    #[serde(rename = "mea-dsr")]
    MeaDsr,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Dsr => "dsr",
            Protocol::MeaDsr => "mea-dsr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dsr" => Some(Protocol::Dsr),
            "mea-dsr" => Some(Protocol::MeaDsr),
            _ => None,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a node knows about itself when an agent callback runs.
#[derive(Debug, Clone, Copy)]
pub struct NodeCtx {
    pub id: NodeId,
    pub now: SimTime,
    pub residual: Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timer {
    Discovery { dst: NodeId, seq: u32 },
    BufferSweep,
    WaitExpiry { src: NodeId, seq: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropCause {
    QueueFull,
    SendBufferTimeout,
    SalvageExhausted,
    NoSalvageRoute,
    LinkBreakNoSalvage,
    LinkBreak,
    NoRoute,
    NodeDead,
    EnergyDepleted,
    ExpiredAtRunEnd,
    RetryLimit,
}

impl DropCause {
    pub fn as_str(self) -> &'static str {
        match self {
            DropCause::QueueFull => "queue-full",
            DropCause::SendBufferTimeout => "send-buffer-timeout",
            DropCause::SalvageExhausted => "salvage-exhausted",
            DropCause::NoSalvageRoute => "no-salvage-route",
            DropCause::LinkBreakNoSalvage => "link-break-no-salvage",
            DropCause::LinkBreak => "link-break",
            DropCause::NoRoute => "no-route",
            DropCause::NodeDead => "node-dead",
            DropCause::EnergyDepleted => "energy-depleted",
            DropCause::ExpiredAtRunEnd => "expired-at-run-end",
            DropCause::RetryLimit => "retry-limit",
        }
    }
}

impl fmt::Display for DropCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Records written to the trace for post-hoc audits.
#[derive(Debug, Clone, PartialEq)]
pub enum Audit {
    /// An intermediate node decided to rebroadcast a request copy.
    RreqForward {
        src: NodeId,
        seq: u32,
        from: NodeId,
        hops: u32,
        /// 1 for the first copy, 2 for the single permitted duplicate.
        copy: u8,
        residual: Energy,
        min_bat_lev: Option<Energy>,
    },
    Selection {
        src: NodeId,
        seq: u32,
        candidates: Vec<RouteCandidate>,
        primary: usize,
        alternate: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Enqueued after the link layer's broadcast jitter.
    Broadcast(Packet),
    Unicast { packet: Packet, next_hop: NodeId },
    /// Unicast enqueued after the same jitter as a broadcast.
    JitteredUnicast { packet: Packet, next_hop: NodeId },
    Deliver(DataPacket),
    Drop { packet: Packet, cause: DropCause },
    Timer { delay: SimDuration, timer: Timer },
    Audit(Audit),
}

pub trait RoutingAgent: Send {
    fn protocol(&self) -> Protocol;

    /// A new data packet from the local traffic source.
    fn originate(&mut self, ctx: &NodeCtx, packet: DataPacket, out: &mut Vec<Action>) -> Result<(), SimError>;

    fn receive(&mut self, ctx: &NodeCtx, packet: Packet, from: NodeId, out: &mut Vec<Action>) -> Result<(), SimError>;

    /// The link layer gave up on a unicast after exhausting its retries.
    fn link_failure(&mut self, ctx: &NodeCtx, packet: Packet, next_hop: NodeId, out: &mut Vec<Action>)
        -> Result<(), SimError>;

    fn timer(&mut self, ctx: &NodeCtx, timer: Timer, out: &mut Vec<Action>) -> Result<(), SimError>;

    /// Removes every buffered data packet (node death or end of run).
    fn drain(&mut self) -> Vec<DataPacket>;

    fn core(&self) -> &RoutingCore;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingConfig {
    pub send_buffer_timeout: SimDuration,
    pub backoff_initial: SimDuration,
    pub backoff_max: SimDuration,
    /// Requests carry a `min_bat_lev` field.
    pub battery_field: bool,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            send_buffer_timeout: SimDuration::from_secs(30),
            backoff_initial: SimDuration::from_millis(500),
            backoff_max: SimDuration::from_secs(10),
            battery_field: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Discovery {
    seq: u32,
    backoff: SimDuration,
    pending: bool,
}

/// Per-node state and behaviour common to DSR and MEA-DSR.
#[derive(Debug, Clone)]
pub struct RoutingCore {
    pub id: NodeId,
    pub cache: RouteCache,
    pub rreq_table: RreqTable,
    pub send_buffer: SendBuffer,
    cfg: RoutingConfig,
    discoveries: BTreeMap<NodeId, Discovery>,
    next_seq: u32,
    sweep_at: Option<SimTime>,
    requests_sent: u64,
}

impl RoutingCore {
    pub fn new(id: NodeId, policy: CachePolicy, cfg: RoutingConfig) -> Self {
        RoutingCore {
            id,
            cache: RouteCache::new(policy),
            rreq_table: RreqTable::default(),
            send_buffer: SendBuffer::new(cfg.send_buffer_timeout),
            cfg,
            discoveries: BTreeMap::new(),
            next_seq: 1,
            sweep_at: None,
            requests_sent: 0,
        }
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.cfg
    }

    /// Route requests this node has originated.
    pub fn requests_sent(&self) -> u64 {
        self.requests_sent
    }

    pub fn discovery_pending(&self, dst: NodeId) -> bool {
        self.discoveries.get(&dst).is_some_and(|d| d.pending)
    }

    /// Stamps `route` onto the packet and hands it to the first hop.
    pub fn send_along(&self, mut packet: DataPacket, route: &[NodeId], out: &mut Vec<Action>) {
        debug_assert_eq!(route.first(), Some(&self.id));
        packet.source_route = route.to_vec();
        packet.cursor = 0;
        let next_hop = route[1];
        out.push(Action::Unicast { packet: Packet::Data(packet), next_hop });
    }

    /// Uses a cached route if there is one, otherwise buffers the packet and
    /// starts (or waits on) a discovery.
    pub fn route_or_buffer(&mut self, ctx: &NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        if let Some(route) = self.cache.lookup(packet.dst) {
            let route = route.to_vec();
            self.send_along(packet, &route, out);
            return;
        }
        let dst = packet.dst;
        self.buffer(ctx, packet, out);
        self.request_route(ctx, dst, out);
    }

    pub fn buffer(&mut self, ctx: &NodeCtx, packet: DataPacket, out: &mut Vec<Action>) {
        self.send_buffer.push(packet, ctx.now);
        self.arm_sweep(ctx, out);
    }

    fn arm_sweep(&mut self, ctx: &NodeCtx, out: &mut Vec<Action>) {
        if self.sweep_at.is_some() {
            return;
        }
        if let Some(at) = self.send_buffer.next_expiry() {
            self.sweep_at = Some(at);
            out.push(Action::Timer { delay: at.saturating_since(ctx.now), timer: Timer::BufferSweep });
        }
    }

    pub fn sweep(&mut self, ctx: &NodeCtx, out: &mut Vec<Action>) {
        self.sweep_at = None;
        self.expire(ctx, out);
        self.arm_sweep(ctx, out);
    }

    fn expire(&mut self, ctx: &NodeCtx, out: &mut Vec<Action>) {
        for p in self.send_buffer.expire(ctx.now) {
            out.push(Action::Drop { packet: Packet::Data(p), cause: DropCause::SendBufferTimeout });
        }
    }

    /// Floods a request for `dst` unless one is already outstanding. Returns
    /// whether a request went out.
    pub fn request_route(&mut self, ctx: &NodeCtx, dst: NodeId, out: &mut Vec<Action>) -> bool {
        let initial = self.cfg.backoff_initial;
        let d = self.discoveries.entry(dst).or_insert(Discovery { seq: 0, backoff: initial, pending: false });
        if d.pending {
            return false;
        }
        d.pending = true;
        let backoff = d.backoff;
        self.emit_request(ctx, dst, backoff, out);
        true
    }

    fn emit_request(&mut self, _ctx: &NodeCtx, dst: NodeId, wait: SimDuration, out: &mut Vec<Action>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.requests_sent += 1;
        if let Some(d) = self.discoveries.get_mut(&dst) {
            d.seq = seq;
        }
        let rreq = Rreq {
            src: self.id,
            dst,
            seq,
            route_record: Vec::new(),
            min_bat_lev: self.cfg.battery_field.then_some(Energy::UNBOUNDED),
        };
        out.push(Action::Broadcast(Packet::Rreq(rreq)));
        out.push(Action::Timer { delay: wait, timer: Timer::Discovery { dst, seq } });
    }

    /// Retry timer for an outstanding discovery: re-flood with doubled backoff
    /// while packets are still waiting and no route has arrived.
    pub fn discovery_timeout(&mut self, ctx: &NodeCtx, dst: NodeId, seq: u32, out: &mut Vec<Action>) {
        let Some(d) = self.discoveries.get(&dst).copied() else { return };
        if !d.pending || d.seq != seq {
            return;
        }
        self.expire(ctx, out);
        if self.cache.has_route(dst) {
            self.route_acquired(ctx, dst, out);
            return;
        }
        if !self.send_buffer.has_packets_for(dst) {
            if let Some(d) = self.discoveries.get_mut(&dst) {
                d.pending = false;
            }
            return;
        }
        let backoff = (d.backoff + d.backoff).min(self.cfg.backoff_max);
        if let Some(d) = self.discoveries.get_mut(&dst) {
            d.backoff = backoff;
        }
        self.emit_request(ctx, dst, backoff, out);
    }

    /// A route to `dst` is now cached: end the discovery and flush the buffer.
    pub fn route_acquired(&mut self, ctx: &NodeCtx, dst: NodeId, out: &mut Vec<Action>) {
        if let Some(d) = self.discoveries.get_mut(&dst) {
            d.pending = false;
            d.backoff = self.cfg.backoff_initial;
        }
        self.expire(ctx, out);
        let Some(route) = self.cache.lookup(dst).map(<[NodeId]>::to_vec) else { return };
        for p in self.send_buffer.take(dst) {
            self.send_along(p, &route, out);
        }
    }

    /// Starts discoveries for buffered traffic that has lost its route.
    pub fn rediscover_buffered(&mut self, ctx: &NodeCtx, out: &mut Vec<Action>) {
        for dst in self.send_buffer.destinations() {
            if !self.cache.has_route(dst) {
                self.request_route(ctx, dst, out);
            }
        }
    }

    /// Sends a route error for `link` back along the prefix of the packet's route.
    pub fn report_break(&self, packet: &DataPacket, link: Link, out: &mut Vec<Action>) {
        if packet.cursor == 0 {
            return;
        }
        let path: Vec<NodeId> = packet.source_route[..=packet.cursor].iter().rev().copied().collect();
        let next_hop = path[1];
        let rerr = Rerr::new(link, packet.src, path);
        out.push(Action::Unicast { packet: Packet::Rerr(rerr), next_hop });
    }

    /// Advances a received source-routed data packet to this node.
    pub fn accept_data(&self, packet: &mut DataPacket) -> Result<(), SimError> {
        let idx = packet.cursor + 1;
        match packet.source_route.get(idx) {
            Some(&n) if n == self.id => {
                packet.cursor = idx;
                Ok(())
            }
            Some(&n) => Err(SimError::CursorMismatch { node: self.id, expected: n }),
            None => Err(SimError::CursorMismatch { node: self.id, expected: self.id }),
        }
    }

    /// Handles a received route error. Returns `true` when this node is the
    /// end of the error's path.
    pub fn accept_rerr(&mut self, mut rerr: Rerr, out: &mut Vec<Action>) -> Result<bool, SimError> {
        let idx = rerr.cursor + 1;
        match rerr.path.get(idx) {
            Some(&n) if n == self.id => rerr.cursor = idx,
            Some(&n) => return Err(SimError::CursorMismatch { node: self.id, expected: n }),
            None => return Err(SimError::CursorMismatch { node: self.id, expected: self.id }),
        }
        self.cache.invalidate_link(rerr.broken_link);
        match rerr.next_hop() {
            Some(next_hop) => {
                out.push(Action::Unicast { packet: Packet::Rerr(rerr), next_hop });
                Ok(false)
            }
            None => Ok(true),
        }
    }

    pub fn drain_buffer(&mut self) -> Vec<DataPacket> {
        self.send_buffer.drain()
    }
}
