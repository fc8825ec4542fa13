//! Line-oriented run trace.
//!
//! ```text
//! # protocol mea-dsr
//! init <node> <pj>
//! session <id> <src> <dst> <rate> <payload> <start_ns>
//! <t_ns> gen <node> data <flow> <src>><dst> <size>
//! <t_ns> enq <node> <kind> <label> <node>><dst|*> <size> f=<frame>
//! <t_ns> tx <node> <kind> <label> <node>><dst|*> <size> f=<frame> try=<k>
//! <t_ns> rx <node> <kind> <label> <from>><node> <size> f=<frame>
//! <t_ns> deliver <node> data <flow> <src>><node> <size> hops=<h>
//! <t_ns> drop <node> <kind> <label> <cause> f=<frame|->
//! <t_ns> charge <node> <tx|rx> <pj>
//! <t_ns> fwd <node> <src>:<seq> from=<n> hops=<h> copy=<c> res=<pj> mbl=<pj|inf|->
//! <t_ns> select <node> <src>:<seq> primary=<i> alternate=<i|-> cands=<route>/<mbl>/<t>,...
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::energy::Energy;
use crate::protocol::{FlowId, PacketKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeMode {
    Tx,
    Rx,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedCandidate {
    pub route: Vec<u32>,
    pub min_bat_lev: Energy,
    pub arrival: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Init { node: u32, initial: Energy },
    Session { id: u32, src: u32, dst: u32, rate: u32, payload: u32, start: u64 },
    Gen { t: u64, node: u32, flow: FlowId, dst: u32, size: u32 },
    Enq { t: u64, node: u32, kind: PacketKind, label: String, dest: Option<u32>, size: u32, frame: u64 },
    Tx { t: u64, node: u32, kind: PacketKind, label: String, dest: Option<u32>, size: u32, frame: u64, attempt: u32 },
    Rx { t: u64, node: u32, from: u32, kind: PacketKind, label: String, size: u32, frame: u64 },
    Deliver { t: u64, node: u32, flow: FlowId, src: u32, size: u32, hops: u32 },
    Drop { t: u64, node: u32, kind: PacketKind, label: String, cause: String, frame: Option<u64> },
    Charge { t: u64, node: u32, mode: ChargeMode, amount: Energy },
    Fwd { t: u64, node: u32, src: u32, seq: u32, from: u32, hops: u32, copy: u8, residual: Energy, min_bat_lev: Option<Energy> },
    Select { t: u64, node: u32, src: u32, seq: u32, primary: usize, alternate: Option<usize>, candidates: Vec<TracedCandidate> },
}

fn opt<T: fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), ToString::to_string)
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Record::Init { node, initial } => write!(f, "init {node} {}", initial.0),
            Record::Session { id, src, dst, rate, payload, start } => {
                write!(f, "session {id} {src} {dst} {rate} {payload} {start}")
            }
            Record::Gen { t, node, flow, dst, size } => write!(f, "{t} gen {node} data {flow} {node}>{dst} {size}"),
            Record::Enq { t, node, kind, label, dest, size, frame } => {
                write!(f, "{t} enq {node} {kind} {label} {node}>{} {size} f={frame}", opt(dest, "*"))
            }
            Record::Tx { t, node, kind, label, dest, size, frame, attempt } => {
                write!(f, "{t} tx {node} {kind} {label} {node}>{} {size} f={frame} try={attempt}", opt(dest, "*"))
            }
            Record::Rx { t, node, from, kind, label, size, frame } => {
                write!(f, "{t} rx {node} {kind} {label} {from}>{node} {size} f={frame}")
            }
            Record::Deliver { t, node, flow, src, size, hops } => {
                write!(f, "{t} deliver {node} data {flow} {src}>{node} {size} hops={hops}")
            }
            Record::Drop { t, node, kind, label, cause, frame } => {
                write!(f, "{t} drop {node} {kind} {label} {cause} f={}", opt(frame, "-"))
            }
            Record::Charge { t, node, mode, amount } => {
                let m = match mode {
                    ChargeMode::Tx => "tx",
                    ChargeMode::Rx => "rx",
                };
                write!(f, "{t} charge {node} {m} {}", amount.0)
            }
            Record::Fwd { t, node, src, seq, from, hops, copy, residual, min_bat_lev } => {
                let mbl = min_bat_lev.map_or_else(|| "-".to_string(), |e| if e.is_unbounded() { "inf".into() } else { e.0.to_string() });
                write!(f, "{t} fwd {node} {src}:{seq} from={from} hops={hops} copy={copy} res={} mbl={mbl}", residual.0)
            }
            Record::Select { t, node, src, seq, primary, alternate, candidates } => {
                write!(f, "{t} select {node} {src}:{seq} primary={primary} alternate={} cands=", opt(alternate, "-"))?;
                for (i, c) in candidates.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    let route: Vec<String> = c.route.iter().map(ToString::to_string).collect();
                    let mbl = if c.min_bat_lev.is_unbounded() { "inf".to_string() } else { c.min_bat_lev.0.to_string() };
                    write!(f, "{}/{mbl}/{}", route.join("-"), c.arrival)?;
                }
                Ok(())
            }
        }
    }
}

/// Collected records for one run.
#[derive(Debug, Default, Clone)]
pub struct Trace {
    pub header: BTreeMap<String, String>,
    pub records: Vec<Record>,
}

impl Trace {
    pub fn render(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 48);
        for (k, v) in &self.header {
            let _ = writeln!(s, "# {k} {v}");
        }
        for r in &self.records {
            let _ = writeln!(s, "{r}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut trace = Trace::default();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                trace.header.insert(k.to_string(), v.to_string());
                continue;
            }
            let rec = parse_record(line).ok_or_else(|| TraceParseError { line: i + 1, text: line.to_string() })?;
            trace.records.push(rec);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceParseError {
    pub line: usize,
    pub text: String,
}

impl fmt::Display for TraceParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unparseable trace line {}: {}", self.line, self.text)
    }
}

impl std::error::Error for TraceParseError {}

fn kv<'a>(tok: &'a str, key: &str) -> Option<&'a str> {
    tok.strip_prefix(key)?.strip_prefix('=')
}

fn flow(s: &str) -> Option<FlowId> {
    let (a, b) = s.strip_prefix('d')?.split_once('.')?;
    Some(FlowId { session: a.parse().ok()?, index: b.parse().ok()? })
}

fn pair(s: &str) -> Option<(&str, &str)> {
    s.split_once('>')
}

fn src_seq(s: &str) -> Option<(u32, u32)> {
    let (a, b) = s.split_once(':')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn energy_field(s: &str) -> Option<Option<Energy>> {
    match s {
        "-" => Some(None),
        "inf" => Some(Some(Energy::UNBOUNDED)),
        n => n.parse().ok().map(|v| Some(Energy(v))),
    }
}

fn dest(s: &str) -> Option<Option<u32>> {
    if s == "*" {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

fn parse_record(line: &str) -> Option<Record> {
    let tok: Vec<&str> = line.split(' ').collect();
    match tok[0] {
        "init" => return Some(Record::Init { node: tok.get(1)?.parse().ok()?, initial: Energy(tok.get(2)?.parse().ok()?) }),
        "session" => {
            let n = |i: usize| -> Option<u64> { tok.get(i)?.parse().ok() };
            return Some(Record::Session {
                id: n(1)? as u32,
                src: n(2)? as u32,
                dst: n(3)? as u32,
                rate: n(4)? as u32,
                payload: n(5)? as u32,
                start: n(6)?,
            });
        }
        _ => {}
    }
    let t: u64 = tok[0].parse().ok()?;
    let node: u32 = tok.get(2)?.parse().ok()?;
    let rec = match *tok.get(1)? {
        "gen" => {
            let (_, d) = pair(tok.get(5)?)?;
            Record::Gen { t, node, flow: flow(tok.get(4)?)?, dst: d.parse().ok()?, size: tok.get(6)?.parse().ok()? }
        }
        "enq" | "tx" => {
            let kind = PacketKind::parse(tok.get(3)?)?;
            let label = tok.get(4)?.to_string();
            let (_, d) = pair(tok.get(5)?)?;
            let dest = dest(d)?;
            let size = tok.get(6)?.parse().ok()?;
            let frame = kv(tok.get(7)?, "f")?.parse().ok()?;
            if tok[1] == "enq" {
                Record::Enq { t, node, kind, label, dest, size, frame }
            } else {
                let attempt = kv(tok.get(8)?, "try")?.parse().ok()?;
                Record::Tx { t, node, kind, label, dest, size, frame, attempt }
            }
        }
        "rx" => {
            let (from, _) = pair(tok.get(5)?)?;
            Record::Rx {
                t,
                node,
                from: from.parse().ok()?,
                kind: PacketKind::parse(tok.get(3)?)?,
                label: tok.get(4)?.to_string(),
                size: tok.get(6)?.parse().ok()?,
                frame: kv(tok.get(7)?, "f")?.parse().ok()?,
            }
        }
        "deliver" => {
            let (src, _) = pair(tok.get(5)?)?;
            Record::Deliver {
                t,
                node,
                flow: flow(tok.get(4)?)?,
                src: src.parse().ok()?,
                size: tok.get(6)?.parse().ok()?,
                hops: kv(tok.get(7)?, "hops")?.parse().ok()?,
            }
        }
        "drop" => {
            let f = kv(tok.get(6)?, "f")?;
            Record::Drop {
                t,
                node,
                kind: PacketKind::parse(tok.get(3)?)?,
                label: tok.get(4)?.to_string(),
                cause: tok.get(5)?.to_string(),
                frame: if f == "-" { None } else { Some(f.parse().ok()?) },
            }
        }
        "charge" => {
            let mode = match *tok.get(3)? {
                "tx" => ChargeMode::Tx,
                "rx" => ChargeMode::Rx,
                _ => return None,
            };
            Record::Charge { t, node, mode, amount: Energy(tok.get(4)?.parse().ok()?) }
        }
        "fwd" => {
            let (src, seq) = src_seq(tok.get(3)?)?;
            Record::Fwd {
                t,
                node,
                src,
                seq,
                from: kv(tok.get(4)?, "from")?.parse().ok()?,
                hops: kv(tok.get(5)?, "hops")?.parse().ok()?,
                copy: kv(tok.get(6)?, "copy")?.parse().ok()?,
                residual: Energy(kv(tok.get(7)?, "res")?.parse().ok()?),
                min_bat_lev: energy_field(kv(tok.get(8)?, "mbl")?)?,
            }
        }
        "select" => {
            let (src, seq) = src_seq(tok.get(3)?)?;
            let alt = kv(tok.get(5)?, "alternate")?;
            let mut candidates = Vec::new();
            for c in kv(tok.get(6)?, "cands")?.split(',') {
                let mut parts = c.split('/');
                let route = parts.next()?.split('-').map(|n| n.parse().ok()).collect::<Option<Vec<u32>>>()?;
                let min_bat_lev = energy_field(parts.next()?)??;
                let arrival = parts.next()?.parse().ok()?;
                candidates.push(TracedCandidate { route, min_bat_lev, arrival });
            }
            Record::Select {
                t,
                node,
                src,
                seq,
                primary: kv(tok.get(4)?, "primary")?.parse().ok()?,
                alternate: if alt == "-" { None } else { Some(alt.parse().ok()?) },
                candidates,
            }
        }
        _ => return None,
    };
    Some(rec)
}
