//! Multipath energy-aware DSR.
//!
//! Requests accumulate the lowest residual battery seen along their path and
//! intermediate nodes forward at most one extra copy. Only the destination
//! replies: after a collection window it picks the route with the best
//! battery-to-length ratio as primary and the most node-disjoint remaining
//! route as alternate. Sources use one route until it breaks, then fall back
//! to the alternate. Relays never salvage.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::energy::Energy;
use crate::engine::SimDuration;
use crate::error::SimError;
use crate::protocol::{
    Action, Audit, CachePolicy, CandidateOutcome, DataPacket, DropCause, Link, NodeCtx, NodeId, Packet, Protocol,
    Rerr, RouteCandidate, RouteRole, RoutesTable, RoutingAgent, RoutingConfig, RoutingCore, Rrep, Rreq, RreqStatus,
    Timer,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeaDsrConfig {
    /// seconds between the first request copy at the destination and selection
    pub wait_time: f64,
    pub alternate_rrep: bool,
}

impl Default for MeaDsrConfig {
    fn default() -> Self {
        MeaDsrConfig { wait_time: 0.05, alternate_rrep: true }
    }
}

impl MeaDsrConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.wait_time > 0.0 && self.wait_time.is_finite()) {
            return Err("mea.wait_time must be positive".into());
        }
        Ok(())
    }
}

/// Compares `min_bat_lev / route_length` exactly.
pub fn energy_ratio_cmp(a: &RouteCandidate, b: &RouteCandidate) -> Ordering {
    let lhs = a.min_bat_lev.0 as u128 * b.route_length() as u128;
    let rhs = b.min_bat_lev.0 as u128 * a.route_length() as u128;
    lhs.cmp(&rhs)
}

/// `min_bat_lev / route_length` in joules per hop.
pub fn energy_ratio(c: &RouteCandidate) -> f64 {
    c.min_bat_lev.as_joules() / c.route_length() as f64
}

/// Exact form of the disjunction ratio `1 - shared / max(1, own)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disjunction {
    pub shared: u64,
    pub own: u64,
}

impl Disjunction {
    pub fn value(self) -> f64 {
        1.0 - self.shared as f64 / self.own.max(1) as f64
    }
}

impl Ord for Disjunction {
    fn cmp(&self, other: &Self) -> Ordering {
        // 1 - a/b vs 1 - c/d  <=>  c*b vs a*d
        let lhs = other.shared as u128 * self.own.max(1) as u128;
        let rhs = self.shared as u128 * other.own.max(1) as u128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Disjunction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn disjunction(candidate: &RouteCandidate, primary: &RouteCandidate) -> Result<Disjunction, SimError> {
    if candidate.route.first() != primary.route.first() || candidate.route.last() != primary.route.last() {
        return Err(SimError::EndpointMismatch);
    }
    let theirs = primary.intermediates();
    let own = candidate.intermediates();
    let shared = own.iter().filter(|n| theirs.contains(n)).count() as u64;
    Ok(Disjunction { shared, own: own.len() as u64 })
}

/// Share of the candidate's relays that the primary does not use; 1.0 means
/// fully node-disjoint, 0.0 means every relay is shared.
pub fn disjunction_ratio(candidate: &RouteCandidate, primary: &RouteCandidate) -> Result<f64, SimError> {
    disjunction(candidate, primary).map(Disjunction::value)
}

fn earlier_then_lexicographic(a: &RouteCandidate, b: &RouteCandidate) -> Ordering {
    a.arrival_time.cmp(&b.arrival_time).then_with(|| a.route.cmp(&b.route))
}

/// Index of the candidate maximising `min_bat_lev / route_length`; ties go to
/// the earliest arrival, then the lexicographically smallest route.
pub fn select_primary(candidates: &[RouteCandidate]) -> Result<usize, SimError> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &candidates[b];
                let better = energy_ratio_cmp(c, cur)
                    .then_with(|| earlier_then_lexicographic(cur, c))
                    == Ordering::Greater;
                Some(if better { i } else { b })
            }
        };
    }
    best.ok_or(SimError::NoCandidates)
}

/// Index of the alternate: highest disjunction ratio from the primary, then
/// the primary criterion, then arrival order.
pub fn select_alternate(candidates: &[RouteCandidate], primary: usize) -> Result<Option<usize>, SimError> {
    let p = &candidates[primary];
    let mut best: Option<(usize, Disjunction)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if i == primary {
            continue;
        }
        let d = disjunction(c, p)?;
        best = match best {
            None => Some((i, d)),
            Some((b, bd)) => {
                let cur = &candidates[b];
                let better = d
                    .cmp(&bd)
                    .then_with(|| energy_ratio_cmp(c, cur))
                    .then_with(|| earlier_then_lexicographic(cur, c))
                    == Ordering::Greater;
                Some(if better { (i, d) } else { (b, bd) })
            }
        };
    }
    Ok(best.map(|(i, _)| i))
}

#[derive(Debug, Clone)]
pub struct MeaDsrNode {
    core: RoutingCore,
    cfg: MeaDsrConfig,
    routes: RoutesTable,
}

impl MeaDsrNode {
    pub fn new(id: NodeId, cfg: MeaDsrConfig, routing: RoutingConfig) -> Self {
        let routing = RoutingConfig { battery_field: true, ..routing };
        MeaDsrNode { core: RoutingCore::new(id, CachePolicy::PrimaryAlternate, routing), cfg, routes: RoutesTable::default() }
    }

    pub fn core_mut(&mut self) -> &mut RoutingCore {
        &mut self.core
    }

    pub fn routes_table(&self) -> &RoutesTable {
        &self.routes
    }

    fn id(&self) -> NodeId {
        self.core.id
    }

    fn handle_rreq(&mut self, ctx: &NodeCtx, rreq: Rreq, from: NodeId, out: &mut Vec<Action>) {
        let me = self.id();
        if rreq.src == me || rreq.route_record.contains(&me) {
            return;
        }
        if rreq.dst == me {
            let candidate = RouteCandidate {
                src: rreq.src,
                seq: rreq.seq,
                route: rreq.full_route(),
                min_bat_lev: rreq.min_bat_lev.unwrap_or(Energy::UNBOUNDED),
                arrival_time: ctx.now,
            };
            if self.routes.add(candidate) == CandidateOutcome::Opened {
                out.push(Action::Timer {
                    delay: SimDuration::from_secs_f64(self.cfg.wait_time),
                    timer: Timer::WaitExpiry { src: rreq.src, seq: rreq.seq },
                });
            }
            return;
        }

        let hops = rreq.hop_count();
        match self.core.rreq_table.record(rreq.src, rreq.seq, from, hops) {
            RreqStatus::First => self.forward(ctx, rreq, from, 1, out),
            RreqStatus::Duplicate(first) => {
                if from != first.last_node && hops <= first.nb_hops {
                    self.core.rreq_table.mark_duplicate_forwarded(rreq.src, rreq.seq);
                    self.forward(ctx, rreq, from, 2, out);
                }
            }
            RreqStatus::Exhausted => {}
        }
    }

    fn forward(&mut self, ctx: &NodeCtx, mut rreq: Rreq, from: NodeId, copy: u8, out: &mut Vec<Action>) {
        let level = if rreq.route_record.is_empty() {
            ctx.residual
        } else {
            rreq.min_bat_lev.unwrap_or(Energy::UNBOUNDED).min(ctx.residual)
        };
        rreq.min_bat_lev = Some(level);
        out.push(Action::Audit(Audit::RreqForward {
            src: rreq.src,
            seq: rreq.seq,
            from,
            hops: rreq.hop_count(),
            copy,
            residual: ctx.residual,
            min_bat_lev: rreq.min_bat_lev,
        }));
        rreq.route_record.push(self.id());
        out.push(Action::Broadcast(Packet::Rreq(rreq)));
    }

    fn select_and_reply(&mut self, src: NodeId, seq: u32, out: &mut Vec<Action>) -> Result<(), SimError> {
        let candidates = self.routes.close(src, seq);
        if candidates.is_empty() {
            return Ok(());
        }
        let primary = select_primary(&candidates)?;
        let alternate = select_alternate(&candidates, primary)?;
        let mut reply = |c: &RouteCandidate, role| {
            let holder = c.route.len() - 1;
            out.push(Action::Unicast {
                next_hop: c.route[holder - 1],
                packet: Packet::Rrep(Rrep { src, dst: self.core.id, seq, route: c.route.clone(), role, holder }),
            });
        };
        reply(&candidates[primary], RouteRole::Primary);
        if let (Some(a), true) = (alternate, self.cfg.alternate_rrep) {
            reply(&candidates[a], RouteRole::Alternate);
        }
        out.push(Action::Audit(Audit::Selection { src, seq, candidates, primary, alternate }));
        Ok(())
    }

    fn handle_rrep(&mut self, ctx: &NodeCtx, mut rrep: Rrep, out: &mut Vec<Action>) -> Result<(), SimError> {
        let idx = crate::dsr::accept_rrep(&mut rrep, self.id())?;
        if idx > 0 {
            let next_hop = rrep.route[idx - 1];
            out.push(Action::Unicast { packet: Packet::Rrep(rrep), next_hop });
            return Ok(());
        }
        let dst = rrep.dst;
        self.core.cache.insert_role(rrep.route, rrep.role, rrep.seq, ctx.now)?;
        if self.core.cache.has_route(dst) {
            self.core.route_acquired(ctx, dst, out);
        }
        Ok(())
    }

    fn handle_rerr(&mut self, ctx: &NodeCtx, rerr: Rerr, out: &mut Vec<Action>) -> Result<(), SimError> {
        let session_src = rerr.session_src;
        if self.core.accept_rerr(rerr, out)? && session_src == self.id() {
            self.core.rediscover_buffered(ctx, out);
        }
        Ok(())
    }
}

impl RoutingAgent for MeaDsrNode {
    fn protocol(&self) -> Protocol {
        Protocol::MeaDsr
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
            Packet::Data(mut d) => {
                self.core.accept_data(&mut d)?;
                match d.next_hop() {
                    None => out.push(Action::Deliver(d)),
                    Some(next_hop) => out.push(Action::Unicast { packet: Packet::Data(d), next_hop }),
                }
                Ok(())
            }
        }
    }

    fn link_failure(&mut self, ctx: &NodeCtx, packet: Packet, next_hop: NodeId, out: &mut Vec<Action>)
        -> Result<(), SimError> {
        let link = Link::new(self.id(), next_hop);
        self.core.cache.invalidate_link(link);
        match packet {
            Packet::Data(mut d) if d.cursor == 0 && d.src == self.id() => {
                d.source_route.clear();
                self.core.route_or_buffer(ctx, d, out);
            }
            Packet::Data(d) => {
                self.core.report_break(&d, link, out);
                out.push(Action::Drop { packet: Packet::Data(d), cause: DropCause::LinkBreakNoSalvage });
            }
            other => out.push(Action::Drop { packet: other, cause: DropCause::LinkBreak }),
        }
        Ok(())
    }

    fn timer(&mut self, ctx: &NodeCtx, timer: Timer, out: &mut Vec<Action>) -> Result<(), SimError> {
        match timer {
            Timer::Discovery { dst, seq } => self.core.discovery_timeout(ctx, dst, seq, out),
            Timer::BufferSweep => self.core.sweep(ctx, out),
            Timer::WaitExpiry { src, seq } => self.select_and_reply(src, seq, out)?,
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
    use crate::engine::SimTime;
    use crate::protocol::FlowId;
    use proptest::prelude::*;

    const S: NodeId = NodeId(0);
    const A: NodeId = NodeId(1);
    const B: NodeId = NodeId(2);
    const C: NodeId = NodeId(3);
    const D: NodeId = NodeId(9);

    fn cand(route: &[u32], mbl_j: f64, t: u64) -> RouteCandidate {
        RouteCandidate {
            src: NodeId(route[0]),
            seq: 1,
            route: route.iter().copied().map(NodeId).collect(),
            min_bat_lev: Energy::from_joules(mbl_j),
            arrival_time: SimTime(t),
        }
    }

    #[test]
    fn primary_maximises_battery_per_hop() {
        let c = [cand(&[0, 1, 2, 9], 40.0, 0), cand(&[0, 3, 9], 20.0, 1)];
        assert!((energy_ratio(&c[0]) - 40.0 / 3.0).abs() < 1e-12);
        assert_eq!(energy_ratio(&c[1]), 10.0);
        assert_eq!(select_primary(&c).unwrap(), 0);
    }

    #[test]
    fn primary_singleton_and_empty() {
        assert_eq!(select_primary(&[cand(&[0, 9], 1.0, 0)]).unwrap(), 0);
        assert!(matches!(select_primary(&[]), Err(SimError::NoCandidates)));
    }

    #[test]
    fn primary_tie_goes_to_earlier_arrival() {
        let c = [cand(&[0, 1, 2, 9], 30.0, 5), cand(&[0, 3, 9], 20.0, 2)];
        assert_eq!(select_primary(&c).unwrap(), 1);
    }

    #[test]
    fn zero_battery_only_wins_when_all_are_zero() {
        let c = [cand(&[0, 1, 9], 0.0, 0), cand(&[0, 2, 3, 4, 9], 0.1, 9)];
        assert_eq!(select_primary(&c).unwrap(), 1);
        let z = [cand(&[0, 1, 9], 0.0, 3), cand(&[0, 2, 9], 0.0, 1)];
        assert_eq!(select_primary(&z).unwrap(), 1);
    }

    #[test]
    fn disjunction_values() {
        let p = cand(&[0, 1, 2, 9], 1.0, 0);
        let c = cand(&[0, 1, 3, 4, 9], 1.0, 0);
        assert!((disjunction_ratio(&c, &p).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(disjunction_ratio(&cand(&[0, 5, 6, 9], 1.0, 0), &p).unwrap(), 1.0);
        assert_eq!(disjunction_ratio(&p, &p).unwrap(), 0.0);
        assert_eq!(disjunction_ratio(&cand(&[0, 9], 1.0, 0), &p).unwrap(), 1.0);
        assert!(matches!(disjunction_ratio(&cand(&[0, 1, 8], 1.0, 0), &p), Err(SimError::EndpointMismatch)));
    }

    #[test]
    fn alternate_prefers_disjointness_over_energy() {
        let c = [
            cand(&[0, 1, 2, 9], 50.0, 0),
            cand(&[0, 1, 3, 9], 90.0, 1), // ratio 0.5
            cand(&[0, 4, 5, 9], 3.0, 2),  // ratio 1.0
        ];
        let p = select_primary(&c).unwrap();
        assert_eq!(p, 1);
        // against primary [0,1,3,9]: c0 shares 1 of 2, c2 shares none
        assert_eq!(select_alternate(&c, p).unwrap(), Some(2));
    }

    #[test]
    fn alternate_ties_broken_by_energy_ratio() {
        let c = [
            cand(&[0, 1, 9], 100.0, 0),
            cand(&[0, 2, 9], 9.0, 1),
            cand(&[0, 3, 9], 12.0, 2),
        ];
        assert_eq!(select_alternate(&c, 0).unwrap(), Some(2));
        assert_eq!(select_alternate(&c[..1], 0).unwrap(), None);
    }

    fn ctx(id: NodeId, residual_j: f64) -> NodeCtx {
        NodeCtx { id, now: SimTime::from_secs_f64(1.0), residual: Energy::from_joules(residual_j) }
    }

    fn node(id: NodeId) -> MeaDsrNode {
        MeaDsrNode::new(id, MeaDsrConfig::default(), RoutingConfig::default())
    }

    fn rreq(record: &[NodeId], mbl: Option<f64>) -> Rreq {
        Rreq {
            src: S,
            dst: D,
            seq: 1,
            route_record: record.to_vec(),
            min_bat_lev: Some(mbl.map(Energy::from_joules).unwrap_or(Energy::UNBOUNDED)),
        }
    }

    fn forwarded(out: &[Action]) -> Vec<Rreq> {
        out.iter()
            .filter_map(|a| match a {
                Action::Broadcast(Packet::Rreq(r)) => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn first_hop_writes_its_residual() {
        let mut n = node(A);
        let mut out = Vec::new();
        n.receive(&ctx(A, 40.0), Packet::Rreq(rreq(&[], None)), S, &mut out).unwrap();
        let f = forwarded(&out);
        assert_eq!(f[0].min_bat_lev, Some(Energy::from_joules(40.0)));
        assert_eq!(f[0].route_record, [A]);
    }

    #[test]
    fn relays_keep_the_minimum() {
        let mut out = Vec::new();
        node(B).receive(&ctx(B, 30.0), Packet::Rreq(rreq(&[A], Some(50.0))), A, &mut out).unwrap();
        assert_eq!(forwarded(&out)[0].min_bat_lev, Some(Energy::from_joules(30.0)));
        out.clear();
        node(B).receive(&ctx(B, 70.0), Packet::Rreq(rreq(&[A], Some(50.0))), A, &mut out).unwrap();
        assert_eq!(forwarded(&out)[0].min_bat_lev, Some(Energy::from_joules(50.0)));
    }

    #[test]
    fn duplicate_forwarding_rule() {
        let mut n = node(B);
        let c = ctx(B, 60.0);
        let mut out = Vec::new();
        n.receive(&c, Packet::Rreq(rreq(&[A], Some(50.0))), A, &mut out).unwrap();
        assert_eq!(forwarded(&out).len(), 1);
        out.clear();
        // same neighbour again
        n.receive(&c, Packet::Rreq(rreq(&[A], Some(50.0))), A, &mut out).unwrap();
        assert!(out.is_empty());
        // longer path from another neighbour
        n.receive(&c, Packet::Rreq(rreq(&[A, C], Some(50.0))), C, &mut out).unwrap();
        assert!(out.is_empty());
        // equal hop count from a different neighbour: forwarded
        n.receive(&c, Packet::Rreq(rreq(&[C], Some(50.0))), C, &mut out).unwrap();
        assert_eq!(forwarded(&out).len(), 1);
        out.clear();
        // a second qualifying duplicate is not
        n.receive(&c, Packet::Rreq(rreq(&[NodeId(4)], Some(50.0))), NodeId(4), &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn intermediates_never_reply_from_cache() {
        let mut n = node(B);
        n.core.cache.insert_role(vec![B, C, D], RouteRole::Primary, 1, SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.receive(&ctx(B, 10.0), Packet::Rreq(rreq(&[A], Some(50.0))), A, &mut out).unwrap();
        assert!(!out.iter().any(|a| matches!(a, Action::Unicast { packet: Packet::Rrep(_), .. })));
        assert_eq!(forwarded(&out).len(), 1);
    }

    fn rreps(out: &[Action]) -> Vec<Rrep> {
        out.iter()
            .filter_map(|a| match a {
                Action::Unicast { packet: Packet::Rrep(r), .. } => Some(r.clone()),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn destination_waits_then_replies_primary_and_alternate() {
        let mut n = node(D);
        let mut out = Vec::new();
        let copies = [(vec![A, B], 40.0), (vec![C], 20.0), (vec![A, C], 35.0)];
        for (i, (rec, mbl)) in copies.iter().enumerate() {
            let mut c = ctx(D, 100.0);
            c.now = SimTime::from_secs_f64(1.0 + i as f64 * 0.01);
            n.receive(&c, Packet::Rreq(rreq(rec, Some(*mbl))), *rec.last().unwrap(), &mut out).unwrap();
        }
        let timers: Vec<_> = out.iter().filter(|a| matches!(a, Action::Timer { .. })).collect();
        assert_eq!(timers.len(), 1, "wait timer starts on the first copy only");
        assert!(rreps(&out).is_empty());
        out.clear();
        n.timer(&ctx(D, 100.0), Timer::WaitExpiry { src: S, seq: 1 }, &mut out).unwrap();
        let r = rreps(&out);
        assert_eq!(r.len(), 2);
        // 40/3 > 35/3 > 20/2
        assert_eq!(r[0].route, [S, A, B, D]);
        assert_eq!(r[0].role, RouteRole::Primary);
        // [S,C,D] is fully disjoint from the primary
        assert_eq!(r[1].route, [S, C, D]);
        assert_eq!(r[1].role, RouteRole::Alternate);

        // a copy arriving after selection is ignored
        out.clear();
        n.receive(&ctx(D, 100.0), Packet::Rreq(rreq(&[B], Some(90.0))), B, &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn single_candidate_gives_one_reply() {
        let mut n = node(D);
        let mut out = Vec::new();
        n.receive(&ctx(D, 100.0), Packet::Rreq(rreq(&[A], Some(5.0))), A, &mut out).unwrap();
        n.timer(&ctx(D, 100.0), Timer::WaitExpiry { src: S, seq: 1 }, &mut out).unwrap();
        assert_eq!(rreps(&out).len(), 1);
    }

    fn data(i: u32) -> DataPacket {
        DataPacket::new(FlowId { session: 0, index: i }, S, D, 512, SimTime::ZERO)
    }

    #[test]
    fn source_switches_to_alternate_without_rediscovery() {
        let mut n = node(S);
        let c = ctx(S, 100.0);
        n.core.cache.insert_role(vec![S, A, B, D], RouteRole::Primary, 1, SimTime::ZERO).unwrap();
        n.core.cache.insert_role(vec![S, C, D], RouteRole::Alternate, 1, SimTime::ZERO).unwrap();
        let mut out = Vec::new();
        n.originate(&c, data(0), &mut out).unwrap();
        assert!(matches!(&out[0], Action::Unicast { next_hop: A, .. }));
        out.clear();
        let rerr = Rerr::new(Link::new(A, B), S, vec![A, S]);
        n.receive(&c, Packet::Rerr(rerr), A, &mut out).unwrap();
        n.originate(&c, data(1), &mut out).unwrap();
        assert!(forwarded(&out).is_empty());
        assert!(matches!(&out[0], Action::Unicast { next_hop: C, packet: Packet::Data(d) } if d.source_route == [S, C, D]));

        out.clear();
        let rerr = Rerr::new(Link::new(C, D), S, vec![C, S]);
        n.receive(&c, Packet::Rerr(rerr), C, &mut out).unwrap();
        n.originate(&c, data(2), &mut out).unwrap();
        n.originate(&c, data(3), &mut out).unwrap();
        assert_eq!(forwarded(&out).len(), 1);
    }

    #[test]
    fn relay_drops_instead_of_salvaging() {
        let mut n = node(A);
        n.core.cache.insert_role(vec![A, C, D], RouteRole::Primary, 1, SimTime::ZERO).unwrap();
        let mut d = data(0);
        d.source_route = vec![S, A, B, D];
        d.cursor = 1;
        let mut out = Vec::new();
        n.link_failure(&ctx(A, 1.0), Packet::Data(d), B, &mut out).unwrap();
        assert!(matches!(&out[0], Action::Unicast { packet: Packet::Rerr(_), next_hop: S }));
        assert!(matches!(&out[1], Action::Drop { cause: DropCause::LinkBreakNoSalvage, .. }));
        assert_eq!(out.len(), 2);
    }

    fn brute_primary(c: &[RouteCandidate]) -> usize {
        // enumerate all indices and keep those no other candidate beats
        (0..c.len())
            .find(|&i| {
                (0..c.len()).all(|j| {
                    let ri = c[i].min_bat_lev.0 as f64 / c[i].route_length() as f64;
                    let rj = c[j].min_bat_lev.0 as f64 / c[j].route_length() as f64;
                    let key = |k: usize| (c[k].arrival_time, c[k].route.clone());
                    i == j || ri > rj || (ri == rj && key(i) <= key(j))
                })
            })
            .unwrap()
    }

    fn arb_table() -> impl Strategy<Value = Vec<RouteCandidate>> {
        prop::collection::vec((prop::collection::btree_set(1u32..9, 0..5), 0u64..6, 0u64..4), 1..8).prop_map(|rows| {
            rows.into_iter()
                .map(|(mids, mbl, t)| {
                    let mut route = vec![NodeId(0)];
                    route.extend(mids.into_iter().map(NodeId));
                    route.push(NodeId(20));
                    RouteCandidate { src: NodeId(0), seq: 1, route, min_bat_lev: Energy(mbl * 7), arrival_time: SimTime(t) }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn primary_matches_brute_force(table in arb_table()) {
            prop_assert_eq!(select_primary(&table).unwrap(), brute_primary(&table));
        }

        #[test]
        fn primary_is_scale_invariant(table in arb_table(), k in 1u64..1000) {
            let scaled: Vec<_> = table.iter().cloned().map(|mut c| { c.min_bat_lev = Energy(c.min_bat_lev.0 * k); c }).collect();
            prop_assert_eq!(select_primary(&table).unwrap(), select_primary(&scaled).unwrap());
        }

        #[test]
        fn disjoint_alternate_chosen_when_available(table in arb_table()) {
            let p = select_primary(&table).unwrap();
            if let Some(a) = select_alternate(&table, p).unwrap() {
                let any_disjoint = table.iter().enumerate()
                    .any(|(i, c)| i != p && disjunction_ratio(c, &table[p]).unwrap() == 1.0);
                if any_disjoint {
                    prop_assert_eq!(disjunction_ratio(&table[a], &table[p]).unwrap(), 1.0);
                }
            } else {
                prop_assert_eq!(table.len(), 1);
            }
        }
    }
}
