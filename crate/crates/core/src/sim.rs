//! Deterministic discrete-event simulator.
//!
//! Every node runs an [`OlsrNode`]. Hellos and TCs are encoded to bytes,
//! broadcast through a distance-based loss model and decoded at each
//! receiver. Data datagrams are forwarded hop by hop along whatever route
//! each relay holds at the moment the datagram reaches it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{ConfigError, NodeId, Position, SimTime};
use crate::routing::{OlsrNode, RouteDelta, RoutingError};
use crate::scenarios::Scenario;
use crate::wire::{self, WireError};

/// One-hop propagation delay.
pub const PROPAGATION_DELAY_MS: u64 = 1;
/// Initial hop budget of a data datagram.
pub const DATA_TTL: u8 = 16;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("mobility trace for node {0} has no waypoints")]
    EmptyTrace(NodeId),
    #[error("mobility trace for node {node}: timestamp {time} is not after its predecessor")]
    UnorderedTrace { node: NodeId, time: SimTime },
    #[error("mobility trace for node {0} has a non-finite coordinate")]
    NonFinitePosition(NodeId),
    #[error("node {0} appears twice")]
    DuplicateNode(NodeId),
    #[error("traffic endpoint {0} is not part of the scenario")]
    UnknownEndpoint(NodeId),
    #[error("traffic window [{start}, {end}) must be non-empty and end by {duration}")]
    BadTrafficWindow {
        start: SimTime,
        end: SimTime,
        duration: SimTime,
    },
    #[error("traffic needs at least one datagram per second")]
    NoTraffic,
    #[error("channel parameters invalid: d50 = {d50}, steepness = {steepness}")]
    BadChannel { d50: f64, steepness: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("trace file line {line}: {msg}")]
    TraceFormat { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Time-ordered waypoints of one node, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    node: NodeId,
    waypoints: Vec<(SimTime, Position)>,
}

impl MobilityTrace {
    pub fn new(node: NodeId, waypoints: Vec<(SimTime, Position)>) -> Result<Self, SimError> {
        if waypoints.is_empty() {
            return Err(SimError::EmptyTrace(node));
        }
        for w in waypoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::UnorderedTrace { node, time: w[1].0 });
            }
        }
        if waypoints.iter().any(|(_, p)| !p.is_finite()) {
            return Err(SimError::NonFinitePosition(node));
        }
        Ok(MobilityTrace { node, waypoints })
    }

    pub fn stationary(node: NodeId, at: Position) -> Self {
        MobilityTrace {
            node,
            waypoints: vec![(SimTime::ZERO, at)],
        }
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn waypoints(&self) -> &[(SimTime, Position)] {
        &self.waypoints
    }

    pub fn start(&self) -> SimTime {
        self.waypoints[0].0
    }

    pub fn end(&self) -> SimTime {
        self.waypoints[self.waypoints.len() - 1].0
    }

    pub fn position_at(&self, t: SimTime) -> Position {
        position_at(self, t)
    }
}

/// Piecewise-linear position, clamped to the first and last waypoint.
pub fn position_at(trace: &MobilityTrace, t: SimTime) -> Position {
    let w = &trace.waypoints;
    let idx = w.partition_point(|(wt, _)| *wt <= t);
    if idx == 0 {
        return w[0].1;
    }
    if idx == w.len() {
        return w[w.len() - 1].1;
    }
    let (t0, p0) = w[idx - 1];
    let (t1, p1) = w[idx];
    let frac = (t.as_millis() - t0.as_millis()) as f64 / (t1.as_millis() - t0.as_millis()) as f64;
    p0.lerp(&p1, frac)
}

/// Reads traces from CSV with header `time_ms,node,x_m,y_m,z_m`.
pub fn read_traces<R: BufRead>(reader: R) -> Result<Vec<MobilityTrace>, SimError> {
    let mut points: BTreeMap<NodeId, Vec<(SimTime, Position)>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != "time_ms,node,x_m,y_m,z_m" {
                return Err(SimError::TraceFormat {
                    line: lineno,
                    msg: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| SimError::TraceFormat { line: lineno, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", fields.len())));
        }
        let t: u64 = fields[0]
            .parse()
            .map_err(|e| bad(format!("time_ms: {e}")))?;
        let id: u32 = fields[1].parse().map_err(|e| bad(format!("node: {e}")))?;
        let node = NodeId::new(id).map_err(|e| bad(e.to_string()))?;
        let mut c = [0.0; 3];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = fields[2 + k]
                .parse()
                .map_err(|e| bad(format!("coordinate: {e}")))?;
        }
        points
            .entry(node)
            .or_default()
            .push((SimTime::from_millis(t), Position::new(c[0], c[1], c[2])));
    }
    points
        .into_iter()
        .map(|(node, wps)| MobilityTrace::new(node, wps))
        .collect()
}

pub fn write_traces<W: Write>(mut w: W, traces: &[MobilityTrace]) -> io::Result<()> {
    writeln!(w, "time_ms,node,x_m,y_m,z_m")?;
    for tr in traces {
        for (t, p) in &tr.waypoints {
            writeln!(w, "{},{},{},{},{}", t.as_millis(), tr.node, p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

/// Logistic distance-loss model: `p(d) = 1 / (1 + exp(k (d - d50)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Distance of 50% delivery, meters.
    pub d50: f64,
    /// Steepness `k`, 1/m.
    pub steepness: f64,
    pub rng_seed: u64,
}

impl ChannelModel {
    pub const DEFAULT_D50: f64 = 480.0;
    pub const DEFAULT_STEEPNESS: f64 = 0.06;

    pub fn new(d50: f64, steepness: f64, rng_seed: u64) -> Self {
        ChannelModel {
            d50,
            steepness,
            rng_seed,
        }
    }

    pub fn with_seed(rng_seed: u64) -> Self {
        Self::new(Self::DEFAULT_D50, Self::DEFAULT_STEEPNESS, rng_seed)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.d50.is_finite()
            && self.d50 > 0.0
            && self.steepness.is_finite()
            && self.steepness > 0.0;
        if ok || (self.d50 == f64::INFINITY && self.steepness > 0.0) {
            Ok(())
        } else {
            Err(SimError::BadChannel {
                d50: self.d50,
                steepness: self.steepness,
            })
        }
    }

    pub fn delivery_probability(&self, distance: f64) -> f64 {
        if self.d50 == f64::INFINITY {
            return 1.0;
        }
        1.0 / (1.0 + (self.steepness * (distance - self.d50)).exp())
    }

    pub fn delivery_trial(&self, distance: f64, draw: f64) -> bool {
        draw < self.delivery_probability(distance)
    }
}

/// Constant-rate datagram stream from `source` to `destination`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficPlan {
    pub source: NodeId,
    pub destination: NodeId,
    pub datagrams_per_second: u32,
    /// Bits per datagram.
    pub datagram_size: u32,
    pub start: SimTime,
    pub end: SimTime,
}

impl TrafficPlan {
    /// 85 datagrams per second, 1 Mbit per second in total.
    pub fn megabit_stream(
        source: NodeId,
        destination: NodeId,
        start: SimTime,
        end: SimTime,
    ) -> Self {
        TrafficPlan {
            source,
            destination,
            datagrams_per_second: 85,
            datagram_size: 1_000_000u32.div_ceil(85),
            start,
            end,
        }
    }

    pub fn bits_per_second(&self) -> u64 {
        self.datagrams_per_second as u64 * self.datagram_size as u64
    }

    /// Emission time of the `k`-th datagram, or `None` past the window.
    pub fn emission_time(&self, k: u64) -> Option<SimTime> {
        let per = self.datagrams_per_second as u64;
        let second = k / per;
        let offset = (k % per) * 1000 / per;
        let t = self.start.add_millis(second * 1000 + offset);
        (t < self.end).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    NoRoute,
    ChannelLoss,
    TtlExceeded,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no_route",
            DropReason::ChannelLoss => "channel_loss",
            DropReason::TtlExceeded => "ttl_exceeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    HelloTx {
        seq: u32,
    },
    HelloRx {
        seq: u32,
    },
    TcTx {
        originator: NodeId,
        ansn: u16,
    },
    TcRx {
        originator: NodeId,
        ansn: u16,
    },
    DataTx {
        id: u64,
    },
    DataRx {
        id: u64,
        hops: u8,
    },
    DataDrop {
        id: u64,
        reason: DropReason,
    },
    RouteChange {
        destination: NodeId,
        next_hop: Option<NodeId>,
        hops: u32,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::HelloTx { .. } => "hello_tx",
            EventKind::HelloRx { .. } => "hello_rx",
            EventKind::TcTx { .. } => "tc_tx",
            EventKind::TcRx { .. } => "tc_rx",
            EventKind::DataTx { .. } => "data_tx",
            EventKind::DataRx { .. } => "data_rx",
            EventKind::DataDrop { .. } => "data_drop",
            EventKind::RouteChange { .. } => "route_change",
        }
    }

    fn is_control(&self) -> bool {
        matches!(
            self,
            EventKind::HelloTx { .. }
                | EventKind::HelloRx { .. }
                | EventKind::TcTx { .. }
                | EventKind::TcRx { .. }
        )
    }
}

/// `node` is where the event happened. `peer` is the sender for receptions,
/// the destination for `data_tx` and `route_change`, and the intended next
/// hop for drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub peer: Option<NodeId>,
    pub kind: EventKind,
}

impl EventRecord {
    fn info(&self) -> String {
        match self.kind {
            EventKind::HelloTx { seq } | EventKind::HelloRx { seq } => format!("seq={seq}"),
            EventKind::TcTx { originator, ansn } | EventKind::TcRx { originator, ansn } => {
                format!("orig={originator} ansn={ansn}")
            }
            EventKind::DataTx { id } => format!("id={id}"),
            EventKind::DataRx { id, hops } => format!("id={id} hops={hops}"),
            EventKind::DataDrop { id, reason } => format!("id={id} reason={}", reason.name()),
            EventKind::RouteChange {
                destination,
                next_hop,
                hops,
            } => match next_hop {
                Some(nh) => format!("dest={destination} next={nh} hops={hops}"),
                None => format!("dest={destination} next=- hops=0"),
            },
        }
    }
}

/// Which records a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogDetail {
    /// Everything, including every Hello and TC transmission and reception.
    #[default]
    Full,
    /// Data and route changes only.
    DataAndRoutes,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn iter(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.records.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time_ms,kind,node,peer,info")?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let peer = r.peer.map(|p| p.to_string()).unwrap_or_default();
            let _ = write!(
                line,
                "{},{},{},{},{}",
                r.time.as_millis(),
                r.kind.name(),
                r.node,
                peer,
                r.info()
            );
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Stream {
    Hello = 1,
    Tc = 2,
    Data = 3,
    Timer = 4,
}

/// Independent ChaCha streams per (transmitter, receiver, packet kind),
/// addressed by node index and created on first use.
struct Streams {
    seed: u64,
    ids: Vec<NodeId>,
    rngs: Vec<Option<ChaCha8Rng>>,
}

const STREAM_KINDS: usize = 4;

impl Streams {
    fn new(seed: u64, ids: Vec<NodeId>) -> Self {
        let n = ids.len();
        Streams {
            seed,
            ids,
            rngs: vec![None; n * n * STREAM_KINDS],
        }
    }

    fn draw(&mut self, from: usize, to: usize, kind: Stream) -> f64 {
        let n = self.ids.len();
        let slot = (from * n + to) * STREAM_KINDS + (kind as usize - 1);
        let (seed, a, b) = (self.seed, self.ids[from].get(), self.ids[to].get());
        self.rngs[slot]
            .get_or_insert_with(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let id = ((a as u64) << 32) | ((b as u64 & 0xff_ffff) << 8) | kind as u64;
                rng.set_stream(id);
                rng
            })
            .gen::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct DataPacket {
    id: u64,
    ttl: u8,
    hops: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ControlKind {
    Hello { seq: u32 },
    Tc,
}

#[derive(Debug)]
enum Event {
    HelloTimer(usize),
    TcTimer(usize),
    ControlArrival {
        from: usize,
        kind: ControlKind,
        bytes: Rc<[u8]>,
        receivers: Vec<usize>,
    },
    DataEmit(u64),
    DataArrival {
        at: usize,
        from: usize,
        packet: DataPacket,
    },
}

struct Queue {
    heap: BinaryHeap<Reverse<(SimTime, u64, usize)>>,
    slots: Vec<Option<Event>>,
    free: Vec<usize>,
    next_seq: u64,
}

impl Queue {
    fn new() -> Self {
        Queue {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            next_seq: 0,
        }
    }

    fn push(&mut self, t: SimTime, ev: Event) {
        let slot = match self.free.pop() {
            Some(s) => {
                self.slots[s] = Some(ev);
                s
            }
            None => {
                self.slots.push(Some(ev));
                self.slots.len() - 1
            }
        };
        self.heap.push(Reverse((t, self.next_seq, slot)));
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<(SimTime, Event)> {
        let Reverse((t, _, slot)) = self.heap.pop()?;
        let ev = self.slots[slot].take().expect("queued slot holds an event");
        self.free.push(slot);
        Some((t, ev))
    }
}

struct Simulator<'a> {
    scenario: &'a Scenario,
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    nodes: Vec<OlsrNode>,
    streams: Streams,
    queue: Queue,
    log: EventLog,
    detail: LogDetail,
    source: usize,
    destination: usize,
}

/// Runs a scenario to completion with the full event log.
pub fn run(scenario: &Scenario) -> Result<EventLog, SimError> {
    run_with(scenario, LogDetail::Full)
}

pub fn run_with(scenario: &Scenario, detail: LogDetail) -> Result<EventLog, SimError> {
    scenario.validate()?;
    let mut sim = Simulator::new(scenario, detail);
    sim.schedule_start();
    sim.run_loop()?;
    Ok(sim.log)
}

impl<'a> Simulator<'a> {
    fn new(scenario: &'a Scenario, detail: LogDetail) -> Self {
        let ids: Vec<NodeId> = scenario.nodes.iter().map(|t| t.node()).collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let nodes = scenario
            .nodes
            .iter()
            .map(|t| {
                OlsrNode::new(
                    t.node(),
                    t.position_at(SimTime::ZERO),
                    scenario.protocol.clone(),
                )
            })
            .collect();
        Simulator {
            scenario,
            source: index[&scenario.traffic.source],
            destination: index[&scenario.traffic.destination],
            streams: Streams::new(scenario.seed, ids.clone()),
            ids,
            index,
            nodes,
            queue: Queue::new(),
            log: EventLog::default(),
            detail,
        }
    }

    fn record(&mut self, time: SimTime, node: usize, peer: Option<usize>, kind: EventKind) {
        if self.detail == LogDetail::DataAndRoutes && kind.is_control() {
            return;
        }
        self.log.records.push(EventRecord {
            time,
            node: self.ids[node],
            peer: peer.map(|p| self.ids[p]),
            kind,
        });
    }

    fn schedule_start(&mut self) {
        let hello = self.scenario.protocol.hello_interval_ms();
        let tc = self.scenario.protocol.tc_interval_ms();
        for i in 0..self.nodes.len() {
            let phase = self.streams.draw(i, i, Stream::Timer);
            let hello_at = (phase * hello as f64) as u64;
            let phase = self.streams.draw(i, i, Stream::Timer);
            let tc_at = (phase * tc as f64) as u64;
            self.queue
                .push(SimTime::from_millis(hello_at), Event::HelloTimer(i));
            self.queue
                .push(SimTime::from_millis(tc_at), Event::TcTimer(i));
        }
        if let Some(t) = self.scenario.traffic.emission_time(0) {
            self.queue.push(t, Event::DataEmit(0));
        }
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        let end = self.scenario.duration;
        while let Some((now, ev)) = self.queue.pop() {
            if now >= end {
                // datagrams already in flight still complete
                if !matches!(ev, Event::DataArrival { .. }) {
                    continue;
                }
            }
            match ev {
                Event::HelloTimer(i) => self.on_hello_timer(i, now)?,
                Event::TcTimer(i) => self.on_tc_timer(i, now)?,
                Event::ControlArrival {
                    from,
                    kind,
                    bytes,
                    receivers,
                } => {
                    for to in receivers {
                        match kind {
                            ControlKind::Hello { seq } => {
                                self.on_hello_rx(to, from, seq, &bytes, now)?
                            }
                            ControlKind::Tc => self.on_tc_rx(to, from, &bytes, now)?,
                        }
                    }
                }
                Event::DataEmit(k) => self.on_data_emit(k, now),
                Event::DataArrival { at, from, packet } => {
                    if at == self.destination {
                        self.record(
                            now,
                            at,
                            Some(from),
                            EventKind::DataRx {
                                id: packet.id,
                                hops: packet.hops,
                            },
                        );
                    } else {
                        self.forward(at, packet, now);
                    }
                }
            }
        }
        Ok(())
    }

    fn position(&self, i: usize, now: SimTime) -> Position {
        self.scenario.nodes[i].position_at(now)
    }

    /// Brings a node's clock-dependent state up to `now`.
    fn touch(&mut self, i: usize, now: SimTime) {
        let p = self.position(i, now);
        let node = &mut self.nodes[i];
        node.set_position(p);
        node.expire(now);
    }

    fn refresh_routes(&mut self, i: usize, now: SimTime) {
        let deltas = self.nodes[i].refresh_routes(now);
        self.log_route_deltas(i, now, &deltas);
    }

    fn log_route_deltas(&mut self, i: usize, now: SimTime, deltas: &[RouteDelta]) {
        for d in deltas {
            let peer = self.index.get(&d.destination).copied();
            let (next_hop, hops) = match d.after {
                Some((nh, h)) => (Some(nh), h),
                None => (None, 0),
            };
            self.record(
                now,
                i,
                peer,
                EventKind::RouteChange {
                    destination: d.destination,
                    next_hop,
                    hops,
                },
            );
        }
    }

    /// Receivers of a broadcast from `from`, one channel trial each.
    fn broadcast_receivers(&mut self, from: usize, now: SimTime, stream: Stream) -> Vec<usize> {
        let origin = self.position(from, now);
        let mut out = Vec::new();
        for to in 0..self.nodes.len() {
            if to == from {
                continue;
            }
            let d = origin.distance_to(&self.position(to, now));
            let draw = self.streams.draw(from, to, stream);
            if self.scenario.channel.delivery_trial(d, draw) {
                out.push(to);
            }
        }
        out
    }

    fn on_hello_timer(&mut self, i: usize, now: SimTime) -> Result<(), SimError> {
        self.touch(i, now);
        self.nodes[i].sample_links(now)?;
        let hello = self.nodes[i].generate_hello(now)?;
        let seq = self.nodes[i].hello_seq();
        let bytes: Rc<[u8]> = wire::encode_hello(&hello)?.into();
        self.record(now, i, None, EventKind::HelloTx { seq });
        let receivers = self.broadcast_receivers(i, now, Stream::Hello);
        if !receivers.is_empty() {
            self.queue.push(
                now.add_millis(PROPAGATION_DELAY_MS),
                Event::ControlArrival {
                    from: i,
                    kind: ControlKind::Hello { seq },
                    bytes,
                    receivers,
                },
            );
        }
        self.refresh_routes(i, now);
        let next = now.add_millis(self.scenario.protocol.hello_interval_ms());
        self.queue.push(next, Event::HelloTimer(i));
        Ok(())
    }

    fn on_tc_timer(&mut self, i: usize, now: SimTime) -> Result<(), SimError> {
        self.touch(i, now);
        let tc = self.nodes[i].generate_tc(now);
        self.record(
            now,
            i,
            None,
            EventKind::TcTx {
                originator: tc.originator,
                ansn: tc.ansn,
            },
        );
        let bytes: Rc<[u8]> = wire::encode_tc(&tc).into();
        self.send_tc(i, bytes, now);
        let next = now.add_millis(self.scenario.protocol.tc_interval_ms());
        self.queue.push(next, Event::TcTimer(i));
        Ok(())
    }

    fn send_tc(&mut self, from: usize, bytes: Rc<[u8]>, now: SimTime) {
        let receivers = self.broadcast_receivers(from, now, Stream::Tc);
        if !receivers.is_empty() {
            self.queue.push(
                now.add_millis(PROPAGATION_DELAY_MS),
                Event::ControlArrival {
                    from,
                    kind: ControlKind::Tc,
                    bytes,
                    receivers,
                },
            );
        }
    }

    fn on_hello_rx(
        &mut self,
        to: usize,
        from: usize,
        seq: u32,
        bytes: &[u8],
        now: SimTime,
    ) -> Result<(), SimError> {
        self.touch(to, now);
        let hello = wire::decode_hello(bytes)?;
        self.nodes[to].process_hello(&hello, self.ids[from], seq, now)?;
        self.record(now, to, Some(from), EventKind::HelloRx { seq });
        Ok(())
    }

    fn on_tc_rx(
        &mut self,
        to: usize,
        from: usize,
        bytes: &Rc<[u8]>,
        now: SimTime,
    ) -> Result<(), SimError> {
        self.touch(to, now);
        let tc = wire::decode_tc(bytes)?;
        let forward = self.nodes[to].process_tc(&tc, now);
        self.record(
            now,
            to,
            Some(from),
            EventKind::TcRx {
                originator: tc.originator,
                ansn: tc.ansn,
            },
        );
        if forward {
            self.record(
                now,
                to,
                None,
                EventKind::TcTx {
                    originator: tc.originator,
                    ansn: tc.ansn,
                },
            );
            self.send_tc(to, Rc::clone(bytes), now);
        }
        Ok(())
    }

    fn on_data_emit(&mut self, k: u64, now: SimTime) {
        let src = self.source;
        self.record(
            now,
            src,
            Some(self.destination),
            EventKind::DataTx { id: k },
        );
        self.forward(
            src,
            DataPacket {
                id: k,
                ttl: DATA_TTL,
                hops: 0,
            },
            now,
        );
        if let Some(t) = self.scenario.traffic.emission_time(k + 1) {
            self.queue.push(t, Event::DataEmit(k + 1));
        }
    }

    fn drop_packet(
        &mut self,
        at: usize,
        peer: Option<usize>,
        id: u64,
        reason: DropReason,
        now: SimTime,
    ) {
        self.record(now, at, peer, EventKind::DataDrop { id, reason });
    }

    fn forward(&mut self, at: usize, packet: DataPacket, now: SimTime) {
        self.touch(at, now);
        if packet.ttl == 0 {
            self.drop_packet(at, None, packet.id, DropReason::TtlExceeded, now);
            return;
        }
        self.refresh_routes(at, now);
        let dest = self.ids[self.destination];
        let next = self.nodes[at]
            .route_to(dest, now)
            .and_then(|r| self.index.get(&r.next_hop).copied());
        let Some(next) = next else {
            self.drop_packet(at, None, packet.id, DropReason::NoRoute, now);
            return;
        };
        let d = self
            .position(at, now)
            .distance_to(&self.position(next, now));
        let draw = self.streams.draw(at, next, Stream::Data);
        if self.scenario.channel.delivery_trial(d, draw) {
            self.queue.push(
                now.add_millis(PROPAGATION_DELAY_MS),
                Event::DataArrival {
                    at: next,
                    from: at,
                    packet: DataPacket {
                        id: packet.id,
                        ttl: packet.ttl - 1,
                        hops: packet.hops + 1,
                    },
                },
            );
        } else {
            self.drop_packet(at, Some(next), packet.id, DropReason::ChannelLoss, now);
        }
    }
}
