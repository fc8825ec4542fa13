//! One simulation run: mobility, link layer, energy and routing agents wired
//! to the event scheduler.

use std::collections::BTreeMap;

use crate::dsr::DsrNode;
use crate::energy::{Energy, EnergyLedger};
use crate::engine::{RandomStream, Scheduler, SimDuration, SimTime};
use crate::error::SimError;
use crate::mea_dsr::MeaDsrNode;
use crate::metrics::{compute_metrics, MetricsReport, RunCounters};
use crate::protocol::{
    Action, Audit, DataPacket, DropCause, FlowId, NodeCtx, NodeId, Packet, Protocol, RoutingAgent, Timer,
};
use crate::scenario::Scenario;
use crate::trace::{ChargeMode, Record, Trace, TracedCandidate};
use crate::traffic::{generate_sessions, Session};
use crate::world::{Arena, Dest, Frame, InterfaceQueue, MobilityState, Point, ReceiverState};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub deaths: usize,
    pub frames: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub protocol: Protocol,
    pub seed: u64,
    pub report: MetricsReport,
    pub counters: RunCounters,
    pub initial: Vec<Energy>,
    pub consumed: Vec<Energy>,
    pub sessions: Vec<Session>,
    pub stats: RunStats,
    pub trace: Option<Trace>,
}

#[derive(Debug)]
enum Ev {
    Move(usize),
    Emit { session: usize, k: u64 },
    TxEnd(usize),
    Enqueue { node: usize, packet: Packet, dest: Dest },
    Timer { node: usize, timer: Timer },
}

#[derive(Debug)]
struct InFlight {
    frame: Frame,
    attempt: u32,
    listeners: Vec<usize>,
}

#[derive(Debug)]
struct Radio {
    queue: InterfaceQueue,
    current: Option<InFlight>,
    rx: ReceiverState,
}

struct Sim<'a> {
    sc: &'a Scenario,
    sched: Scheduler<Ev>,
    end: SimTime,
    arena: Arena,
    mobility: Vec<MobilityState>,
    mobility_rng: Vec<RandomStream>,
    jitter_rng: RandomStream,
    loss_rng: RandomStream,
    agents: Vec<Box<dyn RoutingAgent>>,
    radios: Vec<Radio>,
    ledger: EnergyLedger,
    alive: Vec<bool>,
    sessions: Vec<Session>,
    counters: RunCounters,
    stats: RunStats,
    records: Option<Vec<Record>>,
    scratch: Vec<Action>,
    positions: Vec<Point>,
}

/// Runs `scenario` (with its protocol) under `seed`.
pub fn run(scenario: &Scenario, seed: u64, opts: RunOptions) -> Result<RunOutput, SimError> {
    scenario.validate().map_err(|e| SimError::Config(e.to_string()))?;
    let mut sim = Sim::new(scenario, seed, opts)?;
    sim.execute()?;
    Ok(sim.finish(seed))
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, seed: u64, opts: RunOptions) -> Result<Self, SimError> {
        let n = sc.nodes;
        let arena = sc.arena;
        let mut placement = RandomStream::new(seed, "placement");
        let pause = SimDuration::from_secs_f64(sc.mobility.pause_time);
        let speeds = sc.mobility.speed.interval();
        let mut mobility = Vec::with_capacity(n);
        for _ in 0..n {
            let p = Point { x: placement.draw_uniform(0.0, arena.width)?, y: placement.draw_uniform(0.0, arena.height)? };
            mobility.push(MobilityState::new(p, pause, speeds));
        }
        let mobility_rng = (0..n).map(|i| RandomStream::new(seed, &format!("mobility/{i}"))).collect();
        let mut traffic_rng = RandomStream::new(seed, "traffic");
        let t = &sc.traffic;
        let sessions = generate_sessions(
            t.sessions,
            n,
            t.rate,
            t.payload,
            SimDuration::from_secs_f64(t.start_window),
            &mut traffic_rng,
        )?;
        let routing = sc.routing.config();
        let agents: Vec<Box<dyn RoutingAgent>> = (0..n)
            .map(|i| -> Box<dyn RoutingAgent> {
                let id = NodeId(i as u32);
                match sc.protocol {
                    Protocol::Dsr => Box::new(DsrNode::new(id, sc.dsr, routing)),
                    Protocol::MeaDsr => Box::new(MeaDsrNode::new(id, sc.mea, routing)),
                }
            })
            .collect();
        let radios = (0..n)
            .map(|_| Radio { queue: InterfaceQueue::new(sc.link.queue_capacity), current: None, rx: ReceiverState::default() })
            .collect();
        let initial = Energy::from_joules(sc.energy.initial);
        Ok(Sim {
            sc,
            sched: Scheduler::new(),
            end: SimTime::ZERO + SimDuration::from_secs_f64(sc.run_length),
            arena,
            mobility,
            mobility_rng,
            jitter_rng: RandomStream::new(seed, "jitter"),
            loss_rng: RandomStream::new(seed, "loss"),
            agents,
            radios,
            ledger: EnergyLedger::new(n, initial),
            alive: vec![true; n],
            sessions,
            counters: RunCounters::default(),
            stats: RunStats::default(),
            records: opts.trace.then(Vec::new),
            scratch: Vec::new(),
            positions: vec![Point::default(); n],
        })
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn record(&mut self, f: impl FnOnce() -> Record) {
        if let Some(r) = &mut self.records {
            r.push(f());
        }
    }

    fn execute(&mut self) -> Result<(), SimError> {
        for i in 0..self.sc.nodes {
            let init = self.ledger.initial(i);
            self.record(|| Record::Init { node: i as u32, initial: init });
        }
        for s in self.sessions.clone() {
            self.record(|| Record::Session {
                id: s.id,
                src: s.src.0,
                dst: s.dst.0,
                rate: s.rate,
                payload: s.payload,
                start: s.start.0,
            });
        }
        for i in 0..self.sc.nodes {
            let at = self.mobility[i].next_change();
            if at <= self.end {
                self.sched.schedule(at, Ev::Move(i))?;
            }
        }
        for (i, s) in self.sessions.iter().enumerate() {
            if s.start < self.end {
                self.sched.schedule(s.start, Ev::Emit { session: i, k: 0 })?;
            }
        }
        while let Some((_, ev)) = self.sched.pop_until(self.end) {
            self.stats.events += 1;
            self.dispatch(ev)?;
        }
        self.sched.finish(self.end);
        self.flush_at_end();
        Ok(())
    }

    fn dispatch(&mut self, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Move(i) => {
                let now = self.now();
                let next = self.mobility[i].rwp_step(now, &self.arena, &mut self.mobility_rng[i]);
                if next <= self.end && next > now {
                    self.sched.schedule(next, Ev::Move(i))?;
                }
            }
            Ev::Emit { session, k } => self.emit(session, k)?,
            Ev::TxEnd(node) => self.tx_end(node)?,
            Ev::Enqueue { node, packet, dest } => self.enqueue(node, packet, dest)?,
            Ev::Timer { node, timer } => {
                if self.alive[node] {
                    self.call_agent(node, |a, ctx, out| a.timer(ctx, timer, out))?;
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, idx: usize, k: u64) -> Result<(), SimError> {
        let s = self.sessions[idx].clone();
        let now = self.now();
        let flow = FlowId { session: s.id, index: k as u32 };
        self.counters.data_generated += 1;
        self.record(|| Record::Gen { t: now.0, node: s.src.0, flow, dst: s.dst.0, size: s.payload });
        let packet = DataPacket::new(flow, s.src, s.dst, s.payload, now);
        let src = s.src.index();
        if self.alive[src] {
            self.call_agent(src, |a, ctx, out| a.originate(ctx, packet, out))?;
        } else {
            self.drop_packet(src, &Packet::Data(packet), DropCause::NodeDead, None);
        }
        let next = s.emission_time(k + 1);
        if next < self.end {
            self.sched.schedule(next, Ev::Emit { session: idx, k: k + 1 })?;
        }
        Ok(())
    }

    fn call_agent<F>(&mut self, node: usize, f: F) -> Result<(), SimError>
    where
        F: FnOnce(&mut dyn RoutingAgent, &NodeCtx, &mut Vec<Action>) -> Result<(), SimError>,
    {
        let ctx = NodeCtx { id: NodeId(node as u32), now: self.now(), residual: self.ledger.residual(node) };
        let mut out = std::mem::take(&mut self.scratch);
        out.clear();
        f(self.agents[node].as_mut(), &ctx, &mut out)?;
        for action in out.drain(..) {
            self.act(node, action)?;
        }
        self.scratch = out;
        Ok(())
    }

    fn act(&mut self, node: usize, action: Action) -> Result<(), SimError> {
        let now = self.now();
        match action {
            Action::Broadcast(packet) => self.enqueue_jittered(node, packet, Dest::Broadcast)?,
            Action::Unicast { packet, next_hop } => self.enqueue(node, packet, Dest::Unicast(next_hop))?,
            Action::JitteredUnicast { packet, next_hop } => self.enqueue_jittered(node, packet, Dest::Unicast(next_hop))?,
            Action::Deliver(d) => {
                self.counters.data_received += 1;
                let hops = d.source_route.len().saturating_sub(1) as u32;
                self.record(|| Record::Deliver { t: now.0, node: node as u32, flow: d.id, src: d.src.0, size: d.payload_size, hops });
            }
            Action::Drop { packet, cause } => self.drop_packet(node, &packet, cause, None),
            Action::Timer { delay, timer } => {
                self.sched.schedule_in(delay, Ev::Timer { node, timer });
            }
            Action::Audit(audit) => self.audit(node, audit),
        }
        Ok(())
    }

    fn enqueue_jittered(&mut self, node: usize, packet: Packet, dest: Dest) -> Result<(), SimError> {
        let jitter = self.sc.link.broadcast_jitter_max;
        if jitter > 0.0 {
            let delay = SimDuration::from_secs_f64(self.jitter_rng.draw_uniform(0.0, jitter)?);
            self.sched.schedule_in(delay, Ev::Enqueue { node, packet, dest });
            Ok(())
        } else {
            self.enqueue(node, packet, dest)
        }
    }

    fn audit(&mut self, node: usize, audit: Audit) {
        let t = self.now().0;
        let node = node as u32;
        self.record(|| match audit {
            Audit::RreqForward { src, seq, from, hops, copy, residual, min_bat_lev } => {
                Record::Fwd { t, node, src: src.0, seq, from: from.0, hops, copy, residual, min_bat_lev }
            }
            Audit::Selection { src, seq, candidates, primary, alternate } => Record::Select {
                t,
                node,
                src: src.0,
                seq,
                primary,
                alternate,
                candidates: candidates
                    .into_iter()
                    .map(|c| TracedCandidate {
                        route: c.route.iter().map(|n| n.0).collect(),
                        min_bat_lev: c.min_bat_lev,
                        arrival: c.arrival_time.0,
                    })
                    .collect(),
            },
        });
    }

    fn drop_packet(&mut self, node: usize, packet: &Packet, cause: DropCause, frame: Option<u64>) {
        let t = self.now().0;
        self.record(|| Record::Drop {
            t,
            node: node as u32,
            kind: packet.kind(),
            label: packet.flow_label(),
            cause: cause.as_str().to_string(),
            frame,
        });
    }

    fn enqueue(&mut self, node: usize, packet: Packet, dest: Dest) -> Result<(), SimError> {
        if !self.alive[node] {
            self.drop_packet(node, &packet, DropCause::NodeDead, None);
            return Ok(());
        }
        let id = self.stats.frames;
        self.stats.frames += 1;
        let t = self.now().0;
        let size = packet.size(&self.sc.packet_sizes);
        self.record(|| Record::Enq {
            t,
            node: node as u32,
            kind: packet.kind(),
            label: packet.flow_label(),
            dest: unicast_target(dest),
            size,
            frame: id,
        });
        if let Err(frame) = self.radios[node].queue.push(Frame { id, packet, dest }) {
            self.drop_packet(node, &frame.packet, DropCause::QueueFull, Some(id));
        }
        if self.radios[node].current.is_none() {
            self.start_next(node)?;
        }
        Ok(())
    }

    fn start_next(&mut self, node: usize) -> Result<(), SimError> {
        if !self.alive[node] || self.radios[node].current.is_some() {
            return Ok(());
        }
        if let Some(frame) = self.radios[node].queue.pop() {
            self.begin_attempt(node, frame, 1)?;
        }
        Ok(())
    }

    fn refresh_positions(&mut self) {
        let now = self.now();
        for (p, m) in self.positions.iter_mut().zip(&self.mobility) {
            *p = m.position_at(now);
        }
    }

    fn charge(&mut self, node: usize, mode: ChargeMode, amount: Energy) -> bool {
        let c = self.ledger.charge(node, amount);
        let t = self.now().0;
        if c.amount > Energy::ZERO {
            self.record(|| Record::Charge { t, node: node as u32, mode, amount: c.amount });
        }
        c.truncated
    }

    fn begin_attempt(&mut self, node: usize, frame: Frame, attempt: u32) -> Result<(), SimError> {
        let now = self.now();
        let size = frame.packet.size(&self.sc.packet_sizes);
        let airtime = self.sc.link.airtime(size)?;
        let end = now + airtime;
        let kind = frame.packet.kind();
        if attempt == 1 && kind.is_control() {
            self.counters.control_tx += 1;
        }
        self.record(|| Record::Tx {
            t: now.0,
            node: node as u32,
            kind,
            label: frame.packet.flow_label(),
            dest: unicast_target(frame.dest),
            size,
            frame: frame.id,
            attempt,
        });
        let truncated = self.charge(node, ChargeMode::Tx, self.sc.energy.tx_cost(airtime));
        if truncated {
            self.drop_packet(node, &frame.packet, DropCause::EnergyDepleted, Some(frame.id));
            self.die(node);
            return Ok(());
        }
        self.radios[node].rx.transmit_started(now);

        self.refresh_positions();
        let mode = self.sc.link.interference;
        let rx_cost = self.sc.energy.rx_cost(airtime);
        let overhear = self.sc.energy.overhear_charging;
        let me = self.positions[node];
        let mut listeners = Vec::new();
        let mut dying = Vec::new();
        for j in 0..self.sc.nodes {
            if j == node || !self.alive[j] || !self.arena.in_range(me, self.positions[j]) {
                continue;
            }
            let transmitting = self.radios[j].current.is_some();
            self.radios[j].rx.begin(frame.id, now, end, mode, transmitting);
            let addressed = match frame.dest {
                Dest::Broadcast => true,
                Dest::Unicast(h) => h.index() == j,
            };
            if (addressed || overhear) && !transmitting && self.charge(j, ChargeMode::Rx, rx_cost) {
                dying.push(j);
            }
            listeners.push(j);
        }
        if self.ledger.residual(node) == Energy::ZERO {
            dying.push(node);
        }
        self.radios[node].current = Some(InFlight { frame, attempt, listeners });
        self.sched.schedule(end, Ev::TxEnd(node))?;
        for j in dying {
            self.die(j);
        }
        Ok(())
    }

    fn tx_end(&mut self, node: usize) -> Result<(), SimError> {
        let Some(InFlight { frame, attempt, listeners }) = self.radios[node].current.take() else {
            return Ok(());
        };
        let p_loss = self.sc.link.loss_probability;
        let mut clean = Vec::with_capacity(listeners.len());
        for &j in &listeners {
            let mut ok = self.radios[j].rx.finish(frame.id) == Some(true) && self.alive[j];
            if ok && p_loss > 0.0 && self.loss_rng.bernoulli(p_loss) {
                ok = false;
            }
            if ok {
                clean.push(j);
            }
        }
        let now = self.now().0;
        let size = frame.packet.size(&self.sc.packet_sizes);
        match frame.dest {
            Dest::Broadcast => {
                for j in clean {
                    self.receive(j, node, &frame, size, now)?;
                }
            }
            Dest::Unicast(h) => {
                let hop = h.index();
                if clean.contains(&hop) {
                    self.receive(hop, node, &frame, size, now)?;
                } else if self.alive[node] && attempt < self.sc.link.mac_retries {
                    return self.begin_attempt(node, frame, attempt + 1);
                } else if self.alive[node] {
                    self.drop_packet(node, &frame.packet, DropCause::RetryLimit, Some(frame.id));
                    self.call_agent(node, |a, ctx, out| a.link_failure(ctx, frame.packet, h, out))?;
                } else {
                    self.drop_packet(node, &frame.packet, DropCause::NodeDead, Some(frame.id));
                }
            }
        }
        self.start_next(node)
    }

    fn receive(&mut self, node: usize, from: usize, frame: &Frame, size: u32, t: u64) -> Result<(), SimError> {
        if !self.alive[node] {
            return Ok(());
        }
        self.record(|| Record::Rx {
            t,
            node: node as u32,
            from: from as u32,
            kind: frame.packet.kind(),
            label: frame.packet.flow_label(),
            size,
            frame: frame.id,
        });
        let packet = frame.packet.clone();
        self.call_agent(node, |a, ctx, out| a.receive(ctx, packet, NodeId(from as u32), out))
    }

    fn die(&mut self, node: usize) {
        if !self.alive[node] {
            return;
        }
        self.alive[node] = false;
        self.stats.deaths += 1;
        self.radios[node].rx = ReceiverState::default();
        let queued: Vec<Frame> = self.radios[node].queue.drain().collect();
        for f in queued {
            self.drop_packet(node, &f.packet, DropCause::NodeDead, Some(f.id));
        }
        for p in self.agents[node].drain() {
            self.drop_packet(node, &Packet::Data(p), DropCause::NodeDead, None);
        }
    }

    fn flush_at_end(&mut self) {
        for node in 0..self.sc.nodes {
            if let Some(inf) = self.radios[node].current.take() {
                self.drop_packet(node, &inf.frame.packet, DropCause::ExpiredAtRunEnd, Some(inf.frame.id));
            }
            let queued: Vec<Frame> = self.radios[node].queue.drain().collect();
            for f in queued {
                self.drop_packet(node, &f.packet, DropCause::ExpiredAtRunEnd, Some(f.id));
            }
            for p in self.agents[node].drain() {
                self.drop_packet(node, &Packet::Data(p), DropCause::ExpiredAtRunEnd, None);
            }
        }
    }

    fn finish(self, seed: u64) -> RunOutput {
        let initial = self.ledger.initial_all().to_vec();
        let consumed = self.ledger.consumed_all().to_vec();
        let report = compute_metrics(self.counters, &consumed, &initial);
        let trace = self.records.map(|records| {
            let mut header = BTreeMap::new();
            header.insert("config".to_string(), self.sc.config_hash());
            header.insert("nodes".to_string(), self.sc.nodes.to_string());
            header.insert("protocol".to_string(), self.sc.protocol.to_string());
            header.insert("run_length_ns".to_string(), self.end.0.to_string());
            header.insert("scenario".to_string(), self.sc.name.clone());
            header.insert("seed".to_string(), seed.to_string());
            Trace { header, records }
        });
        RunOutput {
            protocol: self.sc.protocol,
            seed,
            report,
            counters: self.counters,
            initial,
            consumed,
            sessions: self.sessions,
            stats: self.stats,
            trace,
        }
    }
}

fn unicast_target(dest: Dest) -> Option<u32> {
    match dest {
        Dest::Broadcast => None,
        Dest::Unicast(h) => Some(h.0),
    }
}
