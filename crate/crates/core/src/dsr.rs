//! Baseline Dynamic Source Routing.
//!
//! Flooded requests with duplicate suppression, replies from the destination
//! or from any intermediate cache, source-routed forwarding, and salvaging of
//! packets that hit a broken link.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::protocol::{
    is_loop_free, Action, CachePolicy, DataPacket, DropCause, Link, NodeCtx, NodeId, Packet, Protocol, Rerr,
    RouteRole, RoutingAgent, RoutingConfig, RoutingCore, Rrep, Rreq, RreqStatus, Timer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsrConfig {
    pub max_salvage_count: u32,
    pub reply_from_cache: bool,
    pub max_routes_per_dst: usize,
}

impl Default for DsrConfig {
    fn default() -> Self {
        DsrConfig { max_salvage_count: 15, reply_from_cache: true, max_routes_per_dst: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct DsrNode {
    core: RoutingCore,
    cfg: DsrConfig,
}

impl DsrNode {
    pub fn new(id: NodeId, cfg: DsrConfig, routing: RoutingConfig) -> Self {
        let routing = RoutingConfig { battery_field: false, ..routing };
        DsrNode { core: RoutingCore::new(id, CachePolicy::Fifo { max_per_dst: cfg.max_routes_per_dst }, routing), cfg }
    }

    pub fn core_mut(&mut self) -> &mut RoutingCore {
        &mut self.core
    }

    fn id(&self) -> NodeId {
        self.core.id
    }

    fn learn(&mut self, route: Vec<NodeId>, ctx: &NodeCtx) {
        if route.len() >= 2 && route[0] == self.id() {
            // looped routes are simply not cached
            let _ = self.core.cache.insert(route, ctx.now);
        }
    }

    /// Caches both directions of a route this node sits on at `idx`.
    fn learn_from_path(&mut self, path: &[NodeId], idx: usize, ctx: &NodeCtx) {
        self.learn(path[idx..].to_vec(), ctx);
        self.learn(path[..=idx].iter().rev().copied().collect(), ctx);
    }

    fn handle_rreq(&mut self, ctx: &NodeCtx, mut rreq: Rreq, from: NodeId, out: &mut Vec<Action>) {
        let me = self.id();
        if rreq.src == me || rreq.route_record.contains(&me) {
            return;
        }
        let hops = rreq.hop_count();
        if self.core.rreq_table.record(rreq.src, rreq.seq, from, hops) != RreqStatus::First {
            return;
        }
        let mut back: Vec<NodeId> = vec![me];
        back.extend(rreq.route_record.iter().rev());
        back.push(rreq.src);
        self.learn(back, ctx);

        if rreq.dst == me {
            let route = rreq.full_route();
            let holder = route.len() - 1;
            out.push(Action::Unicast {
                next_hop: route[holder - 1],
                packet: Packet::Rrep(Rrep { src: rreq.src, dst: me, seq: rreq.seq, route, role: RouteRole::Primary, holder }),
            });
            return;
        }

        if self.cfg.reply_from_cache {
            if let Some(suffix) = self.core.cache.lookup(rreq.dst) {
                let mut route = Vec::with_capacity(rreq.route_record.len() + 1 + suffix.len());
                route.push(rreq.src);
                route.extend_from_slice(&rreq.route_record);
                route.extend_from_slice(suffix);
                if is_loop_free(&route) {
                    let holder = rreq.route_record.len() + 1;
                    out.push(Action::JitteredUnicast {
                        next_hop: route[holder - 1],
                        packet: Packet::Rrep(Rrep {
                            src: rreq.src,
                            dst: rreq.dst,
                            seq: rreq.seq,
                            route,
                            role: RouteRole::Primary,
                            holder,
                        }),
                    });
                    return;
                }
            }
        }

        rreq.route_record.push(me);
        out.push(Action::Broadcast(Packet::Rreq(rreq)));
    }

    fn handle_rrep(&mut self, ctx: &NodeCtx, mut rrep: Rrep, out: &mut Vec<Action>) -> Result<(), SimError> {
        let idx = accept_rrep(&mut rrep, self.id())?;
        self.learn_from_path(&rrep.route, idx, ctx);
        if idx == 0 {
            self.core.route_acquired(ctx, rrep.dst, out);
        } else {
            let next_hop = rrep.route[idx - 1];
            out.push(Action::Unicast { packet: Packet::Rrep(rrep), next_hop });
        }
        Ok(())
    }

    fn handle_rerr(&mut self, ctx: &NodeCtx, rerr: Rerr, out: &mut Vec<Action>) -> Result<(), SimError> {
        let session_src = rerr.session_src;
        let at_end = self.core.accept_rerr(rerr, out)?;
        if at_end && session_src == self.id() {
            self.core.rediscover_buffered(ctx, out);
        }
        Ok(())
    }

    fn handle_data(&mut self, ctx: &NodeCtx, mut data: DataPacket, out: &mut Vec<Action>) -> Result<(), SimError> {
        self.core.accept_data(&mut data)?;
        let route = data.source_route.clone();
        self.learn_from_path(&route, data.cursor, ctx);
        match data.next_hop() {
            None => out.push(Action::Deliver(data)),
            Some(next_hop) => out.push(Action::Unicast { packet: Packet::Data(data), next_hop }),
        }
        Ok(())
    }

    /// A data packet could not cross `link`: report it upstream and try to
    /// salvage with a cached route.
    fn data_link_failure(&mut self, ctx: &NodeCtx, mut data: DataPacket, link: Link, out: &mut Vec<Action>) {
        if data.cursor == 0 && data.src == self.id() {
            // still at the origin: just pick another route
            data.source_route.clear();
            self.core.route_or_buffer(ctx, data, out);
            return;
        }
        self.core.report_break(&data, link, out);
        if data.salvage_count >= self.cfg.max_salvage_count {
            out.push(Action::Drop { packet: Packet::Data(data), cause: DropCause::SalvageExhausted });
            return;
        }
        match self.core.cache.lookup(data.dst).map(<[NodeId]>::to_vec) {
            Some(route) => {
                data.salvage_count += 1;
                self.core.send_along(data, &route, out);
            }
            None => out.push(Action::Drop { packet: Packet::Data(data), cause: DropCause::NoSalvageRoute }),
        }
    }
}

/// Moves a route reply's holder one hop towards the source.
pub(crate) fn accept_rrep(rrep: &mut Rrep, me: NodeId) -> Result<usize, SimError> {
    let idx = rrep.holder.checked_sub(1).ok_or(SimError::CursorMismatch { node: me, expected: me })?;
    if rrep.route[idx] != me {
        return Err(SimError::CursorMismatch { node: me, expected: rrep.route[idx] });
    }
    rrep.holder = idx;
    Ok(idx)
}

impl RoutingAgent for DsrNode {
    fn protocol(&self) -> Protocol {
        Protocol::Dsr
    }

    fn originate(&mut self, ctx: &NodeCtx, packet: DataPacket, out: &mut Vec<Action>) -> Result<(), SimError> {
        self.core.route_or_buffer(ctx, packet, out);
        Ok(())
    }

    fn receive(&mut self, ctx: &NodeCtx, packet: Packet, from: NodeId, out: &mut Vec<Action>) -> Result<(), SimError> {
        match packet {
            Packet::Rreq(r) => {
                self.handle_rreq(ctx, r, from, out);
                Ok(())
            }
            Packet::Rrep(r) => self.handle_rrep(ctx, r, out),
            Packet::Rerr(e) => self.handle_rerr(ctx, e, out),
            Packet::Data(d) => self.handle_data(ctx, d, out),
        }
    }

    fn link_failure(&mut self, ctx: &NodeCtx, packet: Packet, next_hop: NodeId, out: &mut Vec<Action>)
        -> Result<(), SimError> {
        let link = Link::new(self.id(), next_hop);
        self.core.cache.invalidate_link(link);
        match packet {
            Packet::Data(d) => self.data_link_failure(ctx, d, link, out),
            other => out.push(Action::Drop { packet: other, cause: DropCause::LinkBreak }),
        }
        Ok(())
    }

    fn timer(&mut self, ctx: &NodeCtx, timer: Timer, out: &mut Vec<Action>) -> Result<(), SimError> {
        match timer {
            Timer::Discovery { dst, seq } => self.core.discovery_timeout(ctx, dst, seq, out),
            Timer::BufferSweep => self.core.sweep(ctx, out),
            Timer::WaitExpiry { .. } => {}
        }
        Ok(())
    }

    fn drain(&mut self) -> Vec<DataPacket> {
        self.core.drain_buffer()
    }

    fn core(&self) -> &RoutingCore {
        &self.core
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Energy;
    use crate::engine::SimTime;
    use crate::protocol::FlowId;

    const S: NodeId = NodeId(0);
    const A: NodeId = NodeId(1);
    const B: NodeId = NodeId(2);
    const X: NodeId = NodeId(3);
    const D: NodeId = NodeId(9);

    fn node(id: NodeId) -> DsrNode {
        DsrNode::new(id, DsrConfig::default(), RoutingConfig::default())
    }

    fn ctx(id: NodeId) -> NodeCtx {
        NodeCtx { id, now: SimTime::from_secs_f64(1.0), residual: Energy::from_joules(100.0) }
    }

    fn data(i: u32) -> DataPacket {
        DataPacket::new(FlowId { session: 0, index: i }, S, D, 512, SimTime::ZERO)
    }

    fn rreqs(out: &[Action]) -> Vec<&Rreq> {
        out.iter()
            .filter_map(|a| match a {
                Action::Broadcast(Packet::Rreq(r)) => Some(r),
                _ => None,
            })
            .collect()
    }

    fn rrep(out: &[Action]) -> Option<(&Rrep, NodeId)> {
        out.iter().find_map(|a| match a {
            Action::Unicast { packet: Packet::Rrep(r), next_hop }
            | Action::JitteredUnicast { packet: Packet::Rrep(r), next_hop } => Some((r, *next_hop)),
            _ => None,
        })
    }

    fn rreq(record: &[NodeId], seq: u32) -> Rreq {
        Rreq { src: S, dst: D, seq, route_record: record.to_vec(), min_bat_lev: None }
    }

    #[test]
    fn cache_hit_sends_without_discovery() {
        let mut n = node(S);
        n.core.cache.insert(vec![S, A, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.originate(&ctx(S), data(0), &mut out).unwrap();
        assert!(rreqs(&out).is_empty());
        assert!(matches!(&out[0], Action::Unicast { next_hop: A, packet: Packet::Data(d) } if d.source_route == [S, A, D]));
    }

    #[test]
    fn cache_miss_floods_once_while_pending() {
        let mut n = node(S);
        let mut out = Vec::new();
        n.originate(&ctx(S), data(0), &mut out).unwrap();
        n.originate(&ctx(S), data(1), &mut out).unwrap();
        assert_eq!(rreqs(&out).len(), 1);
        assert_eq!(n.core.send_buffer.len(), 2);
    }

    #[test]
    fn intermediate_drops_duplicates() {
        let mut n = node(A);
        let mut out = Vec::new();
        n.receive(&ctx(A), Packet::Rreq(rreq(&[], 1)), S, &mut out).unwrap();
        assert_eq!(rreqs(&out)[0].route_record, [A]);
        out.clear();
        n.receive(&ctx(A), Packet::Rreq(rreq(&[X], 1)), X, &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn destination_replies_with_accumulated_route() {
        let mut n = node(D);
        let mut out = Vec::new();
        n.receive(&ctx(D), Packet::Rreq(rreq(&[A, B], 1)), B, &mut out).unwrap();
        let (r, next) = rrep(&out).unwrap();
        assert_eq!(r.route, [S, A, B, D]);
        assert_eq!(next, B);
        assert!(rreqs(&out).is_empty());
    }

    #[test]
    fn intermediate_replies_from_cache() {
        let mut n = node(B);
        n.core.cache.insert(vec![B, X, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.receive(&ctx(B), Packet::Rreq(rreq(&[A], 1)), A, &mut out).unwrap();
        let (r, next) = rrep(&out).unwrap();
        assert_eq!(r.route, [S, A, B, X, D]);
        assert_eq!(next, A);
        assert!(rreqs(&out).is_empty(), "cache reply must not rebroadcast");
    }

    #[test]
    fn looping_cache_reply_is_suppressed() {
        let mut n = node(B);
        n.core.cache.insert(vec![B, A, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.receive(&ctx(B), Packet::Rreq(rreq(&[A], 1)), A, &mut out).unwrap();
        assert!(rrep(&out).is_none());
        assert_eq!(rreqs(&out)[0].route_record, [A, B]);
    }

    #[test]
    fn data_forwarding_advances_cursor() {
        let mut n = node(A);
        let mut d = data(0);
        d.source_route = vec![S, A, D];
        let mut out = Vec::new();
        n.receive(&ctx(A), Packet::Data(d), S, &mut out).unwrap();
        let Action::Unicast { packet: Packet::Data(fwd), next_hop } = &out[0] else { panic!() };
        assert_eq!(*next_hop, D);
        assert_eq!(fwd.cursor, 1);
    }

    #[test]
    fn cursor_mismatch_aborts() {
        let mut n = node(B);
        let mut d = data(0);
        d.source_route = vec![S, A, D];
        let mut out = Vec::new();
        assert!(matches!(n.receive(&ctx(B), Packet::Data(d), S, &mut out), Err(SimError::CursorMismatch { .. })));
    }

    fn at_a(salvage: u32) -> DataPacket {
        let mut d = data(0);
        d.source_route = vec![S, A, B, D];
        d.cursor = 1;
        d.salvage_count = salvage;
        d
    }

    #[test]
    fn broken_link_is_reported_and_salvaged() {
        let mut n = node(A);
        n.core.cache.insert(vec![A, X, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.link_failure(&ctx(A), Packet::Data(at_a(0)), B, &mut out).unwrap();
        assert!(matches!(&out[0], Action::Unicast { packet: Packet::Rerr(e), next_hop: S } if e.broken_link == Link::new(A, B)));
        let Action::Unicast { packet: Packet::Data(d), next_hop } = &out[1] else { panic!() };
        assert_eq!(*next_hop, X);
        assert_eq!(d.salvage_count, 1);
        assert_eq!(d.source_route, [A, X, D]);
    }

    #[test]
    fn salvage_limit_drops() {
        let mut n = node(A);
        n.core.cache.insert(vec![A, X, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.link_failure(&ctx(A), Packet::Data(at_a(15)), B, &mut out).unwrap();
        assert!(out.iter().any(|a| matches!(a, Action::Drop { cause: DropCause::SalvageExhausted, .. })));
        assert!(!out.iter().any(|a| matches!(a, Action::Unicast { packet: Packet::Data(_), .. })));
    }

    #[test]
    fn rerr_prunes_and_forwards_upstream() {
        let mut n = node(A);
        n.core.cache.insert(vec![A, B, D], SimTime::ZERO).unwrap();
        let rerr = Rerr::new(Link::new(B, D), S, vec![B, A, S]);
        let mut out = Vec::new();
        n.receive(&ctx(A), Packet::Rerr(rerr), B, &mut out).unwrap();
        assert!(!n.core.cache.has_route(D));
        assert!(matches!(&out[0], Action::Unicast { packet: Packet::Rerr(_), next_hop: S }));
    }

    #[test]
    fn source_with_surviving_route_does_not_rediscover() {
        let mut n = node(S);
        n.core.cache.insert(vec![S, A, B, D], SimTime::ZERO).unwrap();
        n.core.cache.insert(vec![S, X, D], SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        let rerr = Rerr::new(Link::new(A, B), S, vec![A, S]);
        n.receive(&ctx(S), Packet::Rerr(rerr), A, &mut out).unwrap();
        assert!(out.is_empty());
        assert!(n.core.cache.has_route(D));
    }

    #[test]
    fn source_with_empty_cache_rediscovers_with_new_seq() {
        let mut n = node(S);
        let mut out = Vec::new();
        n.originate(&ctx(S), data(0), &mut out).unwrap();
        let first_seq = rreqs(&out)[0].seq;
        let mut c = ctx(S);
        n.core.cache.insert(vec![S, A, B, D], SimTime::ZERO).unwrap();
        n.core.route_acquired(&c, D, &mut out);
        n.originate(&c, data(1), &mut out).unwrap();
        // packet 1 is stuck in the interface queue when the route dies
        n.core.buffer(&c, data(2), &mut out);
        out.clear();
        c.now = SimTime::from_secs_f64(2.0);
        let rerr = Rerr::new(Link::new(A, B), S, vec![A, S]);
        n.receive(&c, Packet::Rerr(rerr), A, &mut out).unwrap();
        let r = rreqs(&out);
        assert_eq!(r.len(), 1);
        assert!(r[0].seq > first_seq);
    }
}
