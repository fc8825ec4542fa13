//! Route request table, destination-side routes table and the send buffer.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::energy::Energy;
use crate::engine::{SimDuration, SimTime};

use super::packet::{DataPacket, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RreqTableEntry {
    pub src: NodeId,
    pub seq: u32,
    /// Hop count of the first copy received.
    pub nb_hops: u32,
    /// Neighbour that transmitted the first copy.
    pub last_node: NodeId,
    pub duplicates_forwarded: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RreqStatus {
    First,
    Duplicate(RreqTableEntry),
    /// The one permitted duplicate has already gone out.
    Exhausted,
}

#[derive(Debug, Default, Clone)]
pub struct RreqTable {
    entries: HashMap<(NodeId, u32), RreqTableEntry>,
}

impl RreqTable {
    pub fn record(&mut self, src: NodeId, seq: u32, from: NodeId, hop_count: u32) -> RreqStatus {
        match self.entries.get(&(src, seq)) {
            None => {
                self.entries.insert(
                    (src, seq),
                    RreqTableEntry { src, seq, nb_hops: hop_count, last_node: from, duplicates_forwarded: 0 },
                );
                RreqStatus::First
            }
            Some(e) if e.duplicates_forwarded >= 1 => RreqStatus::Exhausted,
            Some(e) => RreqStatus::Duplicate(*e),
        }
    }

    pub fn mark_duplicate_forwarded(&mut self, src: NodeId, seq: u32) {
        if let Some(e) = self.entries.get_mut(&(src, seq)) {
            e.duplicates_forwarded = 1;
        }
    }

    pub fn get(&self, src: NodeId, seq: u32) -> Option<&RreqTableEntry> {
        self.entries.get(&(src, seq))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A row of the destination's routes table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteCandidate {
    pub src: NodeId,
    pub seq: u32,
    /// `src ..= dst`
    pub route: Vec<NodeId>,
    pub min_bat_lev: Energy,
    pub arrival_time: SimTime,
}

impl RouteCandidate {
    /// Number of links.
    pub fn route_length(&self) -> u64 {
        self.route.len().saturating_sub(1) as u64
    }

    pub fn intermediates(&self) -> &[NodeId] {
        if self.route.len() < 2 {
            return &[];
        }
        &self.route[1..self.route.len() - 1]
    }
}

/// Candidates collected at a destination, grouped by discovery `(src, seq)`.
#[derive(Debug, Default, Clone)]
pub struct RoutesTable {
    open: BTreeMap<(NodeId, u32), Vec<RouteCandidate>>,
    closed: BTreeSet<(NodeId, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOutcome {
    /// First candidate of this discovery: start the wait timer.
    Opened,
    Added,
    /// Selection for this discovery already ran.
    Late,
}

impl RoutesTable {
    pub fn add(&mut self, c: RouteCandidate) -> CandidateOutcome {
        let key = (c.src, c.seq);
        if self.closed.contains(&key) {
            return CandidateOutcome::Late;
        }
        let rows = self.open.entry(key).or_default();
        rows.push(c);
        if rows.len() == 1 {
            CandidateOutcome::Opened
        } else {
            CandidateOutcome::Added
        }
    }

    /// Removes and returns the candidates, closing the discovery.
    pub fn close(&mut self, src: NodeId, seq: u32) -> Vec<RouteCandidate> {
        self.closed.insert((src, seq));
        self.open.remove(&(src, seq)).unwrap_or_default()
    }

    pub fn candidates(&self, src: NodeId, seq: u32) -> &[RouteCandidate] {
        self.open.get(&(src, seq)).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
struct Buffered {
    packet: DataPacket,
    enqueued_at: SimTime,
}

/// Data packets waiting for a route, per destination.
#[derive(Debug, Clone)]
pub struct SendBuffer {
    timeout: SimDuration,
    queues: BTreeMap<NodeId, VecDeque<Buffered>>,
}

impl SendBuffer {
    pub fn new(timeout: SimDuration) -> Self {
        SendBuffer { timeout, queues: BTreeMap::new() }
    }

    pub fn push(&mut self, packet: DataPacket, now: SimTime) {
        self.queues.entry(packet.dst).or_default().push_back(Buffered { packet, enqueued_at: now });
    }

    /// Takes every packet for `dst`, dropping none: callers expire first.
    pub fn take(&mut self, dst: NodeId) -> Vec<DataPacket> {
        self.queues.remove(&dst).map(|q| q.into_iter().map(|b| b.packet).collect()).unwrap_or_default()
    }

    /// Removes and returns packets that have waited at least the timeout.
    pub fn expire(&mut self, now: SimTime) -> Vec<DataPacket> {
        let mut out = Vec::new();
        for q in self.queues.values_mut() {
            while q.front().is_some_and(|b| b.enqueued_at + self.timeout <= now) {
                out.push(q.pop_front().expect("front checked").packet);
            }
        }
        self.queues.retain(|_, q| !q.is_empty());
        out
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.queues.values().filter_map(|q| q.front()).map(|b| b.enqueued_at + self.timeout).min()
    }

    pub fn destinations(&self) -> Vec<NodeId> {
        self.queues.keys().copied().collect()
    }

    pub fn has_packets_for(&self, dst: NodeId) -> bool {
        self.queues.contains_key(&dst)
    }

    pub fn len(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.is_empty()
    }

    pub fn drain(&mut self) -> Vec<DataPacket> {
        std::mem::take(&mut self.queues).into_values().flat_map(|q| q.into_iter().map(|b| b.packet)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::packet::FlowId;

    #[test]
    fn rreq_table_first_duplicate_exhausted() {
        let mut t = RreqTable::default();
        let (s, a, b) = (NodeId(0), NodeId(1), NodeId(2));
        assert_eq!(t.record(s, 1, a, 2), RreqStatus::First);
        let dup = t.record(s, 1, b, 3);
        assert_eq!(
            dup,
            RreqStatus::Duplicate(RreqTableEntry { src: s, seq: 1, nb_hops: 2, last_node: a, duplicates_forwarded: 0 })
        );
        t.mark_duplicate_forwarded(s, 1);
        assert_eq!(t.record(s, 1, b, 1), RreqStatus::Exhausted);
        assert_eq!(t.record(s, 2, b, 1), RreqStatus::First);
        assert_eq!(t.len(), 2);
    }

    fn cand(seq: u32, t: u64) -> RouteCandidate {
        RouteCandidate {
            src: NodeId(0),
            seq,
            route: vec![NodeId(0), NodeId(1), NodeId(2)],
            min_bat_lev: Energy(1),
            arrival_time: SimTime(t),
        }
    }

    #[test]
    fn routes_table_rejects_late_candidates() {
        let mut rt = RoutesTable::default();
        assert_eq!(rt.add(cand(1, 0)), CandidateOutcome::Opened);
        assert_eq!(rt.add(cand(1, 5)), CandidateOutcome::Added);
        assert_eq!(rt.close(NodeId(0), 1).len(), 2);
        assert_eq!(rt.add(cand(1, 9)), CandidateOutcome::Late);
        assert_eq!(rt.add(cand(2, 9)), CandidateOutcome::Opened);
    }

    #[test]
    fn send_buffer_expires_old_packets() {
        let mut sb = SendBuffer::new(SimDuration::from_secs(30));
        let p = |i| DataPacket::new(FlowId { session: 0, index: i }, NodeId(0), NodeId(5), 512, SimTime::ZERO);
        sb.push(p(0), SimTime::from_secs_f64(0.0));
        sb.push(p(1), SimTime::from_secs_f64(10.0));
        assert_eq!(sb.next_expiry(), Some(SimTime::from_secs_f64(30.0)));
        assert!(sb.expire(SimTime::from_secs_f64(29.9)).is_empty());
        let gone = sb.expire(SimTime::from_secs_f64(30.0));
        assert_eq!(gone.len(), 1);
        assert_eq!(gone[0].id.index, 0);
        assert_eq!(sb.take(NodeId(5)).len(), 1);
        assert!(sb.is_empty());
    }
}
