use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::Energy;
use crate::engine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed hop `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
}

impl Link {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Link { from, to }
    }
}

pub fn is_loop_free(route: &[NodeId]) -> bool {
    route.iter().enumerate().all(|(i, n)| !route[..i].contains(n))
}

pub fn contains_link(route: &[NodeId], link: Link) -> bool {
    route.windows(2).any(|w| w[0] == link.from && w[1] == link.to)
}

/// Identifies one CBR packet: session id and emission index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId {
    pub session: u32,
    pub index: u32,
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}.{}", self.session, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rreq {
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u32,
    /// Relays traversed so far; excludes both endpoints.
    pub route_record: Vec<NodeId>,
    /// Only carried by MEA-DSR.
    pub min_bat_lev: Option<Energy>,
}

impl Rreq {
    /// Hops travelled by a copy that has just been received.
    pub fn hop_count(&self) -> u32 {
        self.route_record.len() as u32 + 1
    }

    /// `src, route_record.., dst`
    pub fn full_route(&self) -> Vec<NodeId> {
        let mut r = Vec::with_capacity(self.route_record.len() + 2);
        r.push(self.src);
        r.extend_from_slice(&self.route_record);
        r.push(self.dst);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RouteRole {
    Primary,
    Alternate,
}

impl fmt::Display for RouteRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RouteRole::Primary => "primary",
            RouteRole::Alternate => "alternate",
        })
    }
}

/// Route reply travelling back along the reversed `route`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rrep {
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u32,
    /// `src ..= dst`
    pub route: Vec<NodeId>,
    pub role: RouteRole,
    /// Index in `route` of the node currently holding the reply.
    pub holder: usize,
}

impl Rrep {
    pub fn next_hop(&self) -> Option<NodeId> {
        self.holder.checked_sub(1).map(|i| self.route[i])
    }
}

/// Route error sent upstream from the node that detected the break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rerr {
    pub reporter: NodeId,
    pub broken_link: Link,
    pub session_src: NodeId,
    /// `reporter, ..., upstream end`
    pub path: Vec<NodeId>,
    pub cursor: usize,
}

impl Rerr {
    pub fn new(broken_link: Link, session_src: NodeId, path: Vec<NodeId>) -> Self {
        Rerr { reporter: broken_link.from, broken_link, session_src, path, cursor: 0 }
    }

    pub fn next_hop(&self) -> Option<NodeId> {
        self.path.get(self.cursor + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    pub source_route: Vec<NodeId>,
    pub cursor: usize,
    pub payload_size: u32,
    pub generated_at: SimTime,
    pub salvage_count: u32,
}

impl DataPacket {
    pub fn new(id: FlowId, src: NodeId, dst: NodeId, payload_size: u32, generated_at: SimTime) -> Self {
        DataPacket { id, src, dst, source_route: Vec::new(), cursor: 0, payload_size, generated_at, salvage_count: 0 }
    }

    pub fn next_hop(&self) -> Option<NodeId> {
        self.source_route.get(self.cursor + 1).copied()
    }

    /// The hop this packet is about to take.
    pub fn current_link(&self) -> Option<Link> {
        self.next_hop().map(|n| Link::new(self.source_route[self.cursor], n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Rreq,
    Rrep,
    Rerr,
    Data,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Rreq => "rreq",
            PacketKind::Rrep => "rrep",
            PacketKind::Rerr => "rerr",
            PacketKind::Data => "data",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "rreq" => PacketKind::Rreq,
            "rrep" => PacketKind::Rrep,
            "rerr" => PacketKind::Rerr,
            "data" => PacketKind::Data,
            _ => return None,
        })
    }

    pub fn is_control(self) -> bool {
        self != PacketKind::Data
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
    Data(DataPacket),
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Rreq(_) => PacketKind::Rreq,
            Packet::Rrep(_) => PacketKind::Rrep,
            Packet::Rerr(_) => PacketKind::Rerr,
            Packet::Data(_) => PacketKind::Data,
        }
    }

    pub fn size(&self, sizes: &PacketSizes) -> u32 {
        match self {
            Packet::Rreq(r) => sizes.rreq(r),
            Packet::Rrep(r) => sizes.rrep_base + sizes.per_node * r.route.len() as u32,
            Packet::Rerr(_) => sizes.rerr,
            Packet::Data(d) => sizes.data_base + sizes.per_node * d.source_route.len() as u32 + d.payload_size,
        }
    }

    /// Trace label: `(src,seq)` for discovery traffic, the flow id for data.
    pub fn flow_label(&self) -> String {
        match self {
            Packet::Rreq(r) => format!("{}:{}", r.src, r.seq),
            Packet::Rrep(r) => format!("{}:{}", r.src, r.seq),
            Packet::Rerr(e) => format!("{}~{}", e.broken_link.from, e.broken_link.to),
            Packet::Data(d) => d.id.to_string(),
        }
    }
}

/// Nominal header sizes in bytes used for airtime and energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSizes {
    pub rreq_base: u32,
    pub per_node: u32,
    pub battery_field: u32,
    pub rrep_base: u32,
    pub rerr: u32,
    pub data_base: u32,
}

impl Default for PacketSizes {
    fn default() -> Self {
        PacketSizes { rreq_base: 16, per_node: 4, battery_field: 8, rrep_base: 16, rerr: 20, data_base: 24 }
    }
}

impl PacketSizes {
    pub fn rreq(&self, r: &Rreq) -> u32 {
        let battery = if r.min_bat_lev.is_some() { self.battery_field } else { 0 };
        self.rreq_base + self.per_node * r.route_record.len() as u32 + battery
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    #[test]
    fn loop_detection() {
        assert!(is_loop_free(&ids(&[1, 2, 3])));
        assert!(!is_loop_free(&ids(&[1, 2, 1])));
        assert!(is_loop_free(&[]));
    }

    #[test]
    fn directed_link_membership() {
        let r = ids(&[0, 1, 2, 3]);
        assert!(contains_link(&r, Link::new(NodeId(1), NodeId(2))));
        assert!(!contains_link(&r, Link::new(NodeId(2), NodeId(1))));
    }

    #[test]
    fn nominal_sizes() {
        let s = PacketSizes::default();
        let mut rreq = Rreq { src: NodeId(0), dst: NodeId(9), seq: 1, route_record: ids(&[3, 4]), min_bat_lev: None };
        assert_eq!(Packet::Rreq(rreq.clone()).size(&s), 24);
        rreq.min_bat_lev = Some(Energy(5));
        assert_eq!(Packet::Rreq(rreq).size(&s), 32);
        let mut d = DataPacket::new(FlowId { session: 0, index: 0 }, NodeId(0), NodeId(2), 512, SimTime::ZERO);
        d.source_route = ids(&[0, 1, 2]);
        assert_eq!(Packet::Data(d).size(&s), 24 + 12 + 512);
        let e = Rerr::new(Link::new(NodeId(1), NodeId(2)), NodeId(0), ids(&[1, 0]));
        assert_eq!(Packet::Rerr(e).size(&s), 20);
    }
}
