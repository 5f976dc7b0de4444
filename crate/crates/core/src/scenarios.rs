//! Scenario builders, datagram-loss-rate series and outage statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{MetricKind, NodeId, Position, ProtocolConfig, SimTime};
use crate::sim::{
    self, ChannelModel, EventKind, EventLog, LogDetail, MobilityTrace, SimError, TrafficPlan,
};

/// Time before traffic starts, so receiving ratios settle.
pub const WARMUP: SimTime = SimTime::from_secs(30);
/// Duration of one out-and-back loop of the two-relay source.
pub const TWO_RELAY_LOOP: SimTime = SimTime::from_secs(160);
/// Turn-around distance of the two-relay source.
pub const TWO_RELAY_REACH: f64 = 850.0;
pub const RELAY_RADIUS: f64 = 20.0;
/// Loiter ground speed of the circling relays, m/s.
pub const RELAY_SPEED: f64 = 15.0;
/// Duration of the open-area scan.
pub const OPEN_AREA_SCAN: SimTime = SimTime::from_secs(870);
pub const GRID_PITCH: f64 = 300.0;
pub const GRID_COLUMNS: u32 = 5;
pub const GRID_ROWS: u32 = 6;
/// Spacing of the circle waypoints.
const LOITER_STEP_MS: u64 = 100;

pub const DESTINATION: NodeId = NodeId::of(1);
pub const SOURCE: NodeId = NodeId::of(2);

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no runs to summarize")]
    NoRuns,
    #[error("run {run} has {got} windows, expected {expected}")]
    MisalignedRuns {
        run: usize,
        got: usize,
        expected: usize,
    },
    #[error("DLR file line {line}: {msg}")]
    DlrFormat { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Everything needed for one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub nodes: Vec<MobilityTrace>,
    pub channel: ChannelModel,
    pub traffic: TrafficPlan,
    pub protocol: ProtocolConfig,
    pub duration: SimTime,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.protocol.validate()?;
        self.channel.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.nodes {
            if !seen.insert(t.node()) {
                return Err(SimError::DuplicateNode(t.node()));
            }
        }
        for ep in [self.traffic.source, self.traffic.destination] {
            if !seen.contains(&ep) {
                return Err(SimError::UnknownEndpoint(ep));
            }
        }
        if self.traffic.datagrams_per_second == 0 {
            return Err(SimError::NoTraffic);
        }
        if self.traffic.start >= self.traffic.end || self.traffic.end > self.duration {
            return Err(SimError::BadTrafficWindow {
                start: self.traffic.start,
                end: self.traffic.end,
                duration: self.duration,
            });
        }
        Ok(())
    }

    pub fn trace(&self, id: NodeId) -> Option<&MobilityTrace> {
        self.nodes.iter().find(|t| t.node() == id)
    }

    /// Scenario from a trace file: node 2 streams to node 1 from the end of
    /// the warm-up until the last waypoint.
    pub fn from_traces(
        name: &str,
        traces: Vec<MobilityTrace>,
        protocol: ProtocolConfig,
        channel: ChannelModel,
        seed: u64,
    ) -> Result<Self, SimError> {
        let end = traces
            .iter()
            .map(|t| t.end())
            .max()
            .unwrap_or(SimTime::ZERO);
        let duration = end.max(WARMUP.add_millis(1000));
        let mut nodes = traces;
        nodes.sort_by_key(|t| t.node());
        let s = Scenario {
            name: name.to_string(),
            nodes,
            channel: ChannelModel {
                rng_seed: seed,
                ..channel
            },
            traffic: TrafficPlan::megabit_stream(SOURCE, DESTINATION, WARMUP, duration),
            protocol,
            duration,
            seed,
        };
        s.validate()?;
        Ok(s)
    }
}

fn loiter_trace(node: NodeId, center: Position, until: SimTime) -> MobilityTrace {
    let omega = RELAY_SPEED / RELAY_RADIUS;
    let steps = until.as_millis() / LOITER_STEP_MS + 1;
    let waypoints = (0..=steps)
        .map(|k| {
            let t = SimTime::from_millis(k * LOITER_STEP_MS);
            let a = omega * t.as_secs_f64();
            (
                t,
                Position::new(
                    center.x + RELAY_RADIUS * a.cos(),
                    center.y + RELAY_RADIUS * a.sin(),
                    center.z,
                ),
            )
        })
        .collect();
    MobilityTrace::new(node, waypoints).expect("loiter waypoints are ordered and finite")
}

/// Source, destination, and two circling relays in a line.
///
/// Node 1 sits at the origin. Relays 3 and 4 circle (radius 20 m, 15 m/s)
/// around x = 300 m and x = 600 m. After the warm-up, node 2 flies from the
/// origin to x = 850 m and back in 160 s while streaming to node 1.
pub fn build_two_relay(protocol: ProtocolConfig, seed: u64) -> Scenario {
    let start = WARMUP;
    let duration = start.add_millis(TWO_RELAY_LOOP.as_millis());
    let half = start.add_millis(TWO_RELAY_LOOP.as_millis() / 2);
    let source = MobilityTrace::new(
        SOURCE,
        vec![
            (SimTime::ZERO, Position::ORIGIN),
            (start, Position::ORIGIN),
            (half, Position::new(TWO_RELAY_REACH, 0.0, 0.0)),
            (duration, Position::ORIGIN),
        ],
    )
    .expect("ordered waypoints");
    let nodes = vec![
        MobilityTrace::stationary(DESTINATION, Position::ORIGIN),
        source,
        loiter_trace(NodeId::of(3), Position::new(300.0, 0.0, 0.0), duration),
        loiter_trace(NodeId::of(4), Position::new(600.0, 0.0, 0.0), duration),
    ];
    Scenario {
        name: "two_relay".into(),
        nodes,
        channel: ChannelModel::with_seed(seed),
        traffic: TrafficPlan::megabit_stream(SOURCE, DESTINATION, start, duration),
        protocol,
        duration,
        seed,
    }
}

/// Grid position of relay `id` (3..=32), numbered column by column.
pub fn grid_position(id: NodeId) -> Option<Position> {
    let k = id.get().checked_sub(3)?;
    if k >= GRID_COLUMNS * GRID_ROWS {
        return None;
    }
    let (col, row) = (k / GRID_ROWS, k % GRID_ROWS);
    Some(Position::new(
        col as f64 * GRID_PITCH,
        row as f64 * GRID_PITCH,
        0.0,
    ))
}

/// Node 1 sits one pitch west of relay 5.
pub const OPEN_AREA_DESTINATION: Position = Position::new(-GRID_PITCH, 2.0 * GRID_PITCH, 0.0);

/// Lawnmower path over the 1200 m x 1500 m area, lanes midway between relay
/// columns.
pub fn open_area_path() -> Vec<Position> {
    let lanes = GRID_COLUMNS - 1;
    let top = (GRID_ROWS - 1) as f64 * GRID_PITCH;
    let mut path = Vec::new();
    for lane in 0..lanes {
        let x = (lane as f64 + 0.5) * GRID_PITCH;
        let (a, b) = if lane % 2 == 0 {
            (0.0, top)
        } else {
            (top, 0.0)
        };
        path.push(Position::new(x, a, 0.0));
        path.push(Position::new(x, b, 0.0));
    }
    path
}

/// 30 static relays on a 5 x 6 grid, a static destination next to the grid
/// and one UAV scanning the area while streaming to node 1.
pub fn build_open_area(protocol: ProtocolConfig, seed: u64) -> Scenario {
    let start = WARMUP;
    let duration = start.add_millis(OPEN_AREA_SCAN.as_millis());
    let path = open_area_path();
    let total: f64 = path.windows(2).map(|w| w[0].distance_to(&w[1])).sum();
    let mut waypoints = vec![(SimTime::ZERO, path[0])];
    let mut travelled = 0.0;
    for (i, p) in path.iter().enumerate() {
        if i > 0 {
            travelled += path[i - 1].distance_to(p);
        }
        let t = start.as_millis()
            + (OPEN_AREA_SCAN.as_millis() as f64 * travelled / total).round() as u64;
        waypoints.push((SimTime::from_millis(t), *p));
    }
    let mut nodes = vec![
        MobilityTrace::stationary(DESTINATION, OPEN_AREA_DESTINATION),
        MobilityTrace::new(SOURCE, waypoints).expect("scan waypoints are ordered"),
    ];
    for id in 3..3 + GRID_COLUMNS * GRID_ROWS {
        let id = NodeId::of(id);
        nodes.push(MobilityTrace::stationary(
            id,
            grid_position(id).expect("relay id in grid"),
        ));
    }
    Scenario {
        name: "open_area".into(),
        nodes,
        channel: ChannelModel::with_seed(seed),
        traffic: TrafficPlan::megabit_stream(SOURCE, DESTINATION, start, duration),
        protocol,
        duration,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlrWindow {
    pub second: u32,
    pub sent: u32,
    pub lost: u32,
    pub dlr: f64,
}

/// Per-second datagram loss rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DlrSeries {
    pub windows: Vec<DlrWindow>,
}

impl DlrSeries {
    pub fn mean(&self) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().map(|w| w.dlr).sum::<f64>() / self.windows.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.windows.iter().map(|w| w.dlr).fold(0.0, f64::max)
    }

    pub fn outage_percent(&self, threshold: f64) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        let out = self.windows.iter().filter(|w| w.dlr > threshold).count();
        100.0 * out as f64 / self.windows.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "second,sent,lost,dlr")?;
        for win in &self.windows {
            writeln!(w, "{},{},{},{}", win.second, win.sent, win.lost, win.dlr)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self, ScenarioError> {
        let mut windows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let bad = |msg: String| ScenarioError::DlrFormat { line: i + 1, msg };
            if i == 0 {
                if line.trim() != "second,sent,lost,dlr" {
                    return Err(bad(format!("unexpected header {line:?}")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", f.len())));
            }
            windows.push(DlrWindow {
                second: f[0].parse().map_err(|e| bad(format!("second: {e}")))?,
                sent: f[1].parse().map_err(|e| bad(format!("sent: {e}")))?,
                lost: f[2].parse().map_err(|e| bad(format!("lost: {e}")))?,
                dlr: f[3].parse().map_err(|e| bad(format!("dlr: {e}")))?,
            });
        }
        Ok(DlrSeries { windows })
    }
}

/// Loss rate per one-second window of the traffic plan. A datagram counts
/// for the window it was sent in; windows with nothing sent are skipped.
pub fn compute_dlr(log: &EventLog, traffic: &TrafficPlan) -> DlrSeries {
    let mut sent_at: BTreeMap<u64, u32> = BTreeMap::new();
    let mut per_window: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for r in log.iter() {
        if let EventKind::DataTx { id } = r.kind {
            if r.node != traffic.source || r.time < traffic.start || r.time >= traffic.end {
                continue;
            }
            let w = (r.time.saturating_sub(traffic.start) / 1000) as u32;
            sent_at.insert(id, w);
            per_window.entry(w).or_default().0 += 1;
        }
    }
    for r in log.iter() {
        if let EventKind::DataRx { id, .. } = r.kind {
            if r.node != traffic.destination {
                continue;
            }
            if let Some(w) = sent_at.remove(&id) {
                per_window.entry(w).or_default().1 += 1;
            }
        }
    }
    let windows = per_window
        .into_iter()
        .filter(|(_, (sent, _))| *sent > 0)
        .map(|(second, (sent, received))| {
            let lost = sent - received;
            DlrWindow {
                second,
                sent,
                lost,
                dlr: lost as f64 / sent as f64,
            }
        })
        .collect();
    DlrSeries { windows }
}

pub const OUTAGE_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageSummary {
    pub threshold: f64,
    /// Mean over runs of the percentage of windows with DLR above threshold.
    pub outage_percent: f64,
    pub runs: usize,
}

pub fn outage_summary(
    series: &[DlrSeries],
    threshold: f64,
) -> Result<OutageSummary, ScenarioError> {
    if series.is_empty() {
        return Err(ScenarioError::NoRuns);
    }
    let total: f64 = series.iter().map(|s| s.outage_percent(threshold)).sum();
    Ok(OutageSummary {
        threshold,
        outage_percent: total / series.len() as f64,
        runs: series.len(),
    })
}

/// Pointwise mean DLR over aligned runs. `sent` and `lost` are summed.
pub fn average_dlr_profile(series: &[DlrSeries]) -> Result<DlrSeries, ScenarioError> {
    let first = series.first().ok_or(ScenarioError::NoRuns)?;
    let len = first.windows.len();
    for (run, s) in series.iter().enumerate() {
        if s.windows.len() != len {
            return Err(ScenarioError::MisalignedRuns {
                run,
                got: s.windows.len(),
                expected: len,
            });
        }
    }
    let n = series.len() as f64;
    let windows = (0..len)
        .map(|i| DlrWindow {
            second: first.windows[i].second,
            sent: series.iter().map(|s| s.windows[i].sent).sum(),
            lost: series.iter().map(|s| s.windows[i].lost).sum(),
            dlr: series.iter().map(|s| s.windows[i].dlr).sum::<f64>() / n,
        })
        .collect();
    Ok(DlrSeries { windows })
}

/// Hop count of the source's route to the destination at the middle of each
/// traffic window; `None` while there is no route.
pub fn hop_count_profile(log: &EventLog, traffic: &TrafficPlan) -> Vec<Option<u32>> {
    let changes: Vec<(SimTime, Option<u32>)> = log
        .iter()
        .filter(|r| r.node == traffic.source)
        .filter_map(|r| match r.kind {
            EventKind::RouteChange {
                destination,
                next_hop,
                hops,
            } if destination == traffic.destination => Some((r.time, next_hop.map(|_| hops))),
            _ => None,
        })
        .collect();
    let windows = traffic.end.saturating_sub(traffic.start).div_ceil(1000);
    (0..windows)
        .map(|w| {
            let probe = traffic.start.add_millis(w * 1000 + 500);
            let idx = changes.partition_point(|(t, _)| *t <= probe);
            if idx == 0 {
                None
            } else {
                changes[idx - 1].1
            }
        })
        .collect()
}

/// Most common hop count per window across runs; ties go to the smaller
/// count.
pub fn modal_hop_profile(profiles: &[Vec<Option<u32>>]) -> Vec<Option<u32>> {
    let len = profiles.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let mut counts: BTreeMap<Option<u32>, usize> = BTreeMap::new();
            for p in profiles {
                *counts.entry(p[i]).or_default() += 1;
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(h, _)| h)
                .unwrap_or(None)
        })
        .collect()
}

/// Distinct consecutive values, e.g. `[1, 1, 2, 3, 3, 2]` becomes `[1, 2, 3, 2]`.
pub fn collapse_runs<T: PartialEq + Copy>(values: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for &v in values {
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

/// Scenario family selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    TwoRelay,
    OpenArea,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TwoRelay => "two_relay",
            ScenarioKind::OpenArea => "open_area",
        }
    }

    pub fn build(self, protocol: ProtocolConfig, seed: u64) -> Scenario {
        match self {
            ScenarioKind::TwoRelay => build_two_relay(protocol, seed),
            ScenarioKind::OpenArea => build_open_area(protocol, seed),
        }
    }

    /// Scaled-down replication counts used by default.
    pub fn default_runs(self) -> usize {
        match self {
            ScenarioKind::TwoRelay => 20,
            ScenarioKind::OpenArea => 10,
        }
    }
}

/// The two routing variants being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    OlsrEtx,
    PredictiveOlsr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OlsrEtx => "olsr_etx",
            Algorithm::PredictiveOlsr => "predictive_olsr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "olsr_etx" => Some(Algorithm::OlsrEtx),
            "predictive_olsr" => Some(Algorithm::PredictiveOlsr),
            _ => None,
        }
    }

    pub fn default_config(self) -> ProtocolConfig {
        match self {
            Algorithm::OlsrEtx => ProtocolConfig::olsr_etx(),
            Algorithm::PredictiveOlsr => ProtocolConfig::predictive_olsr(),
        }
    }

    pub fn of(config: &ProtocolConfig) -> Self {
        match config.metric_kind {
            MetricKind::PlainEtx => Algorithm::OlsrEtx,
            MetricKind::SpeedWeightedEtx => Algorithm::PredictiveOlsr,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub seed: u64,
    pub dlr: DlrSeries,
    pub hops: Vec<Option<u32>>,
    /// Kept only when requested.
    pub log: Option<EventLog>,
}

/// Runs `runs` replications with seeds `base_seed, base_seed + 1, ...`.
/// Results come back in seed order regardless of scheduling.
pub fn run_replications<F>(
    build: F,
    runs: usize,
    base_seed: u64,
    keep_logs: bool,
) -> Result<Vec<Replication>, ScenarioError>
where
    F: Fn(u64) -> Scenario + Sync,
{
    let detail = if keep_logs {
        LogDetail::Full
    } else {
        LogDetail::DataAndRoutes
    };
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let scenario = build(seed);
            let log = sim::run_with(&scenario, detail)?;
            Ok(Replication {
                seed,
                dlr: compute_dlr(&log, &scenario.traffic),
                hops: hop_count_profile(&log, &scenario.traffic),
                log: keep_logs.then_some(log),
            })
        })
        .collect()
}

/// Headline numbers of one algorithm on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub outage_percent: f64,
    pub mean_dlr: f64,
    pub max_dlr: f64,
}

impl ExperimentSummary {
    pub fn from_runs(
        scenario: &str,
        algorithm: Algorithm,
        runs: &[Replication],
    ) -> Result<Self, ScenarioError> {
        let series: Vec<DlrSeries> = runs.iter().map(|r| r.dlr.clone()).collect();
        let outage = outage_summary(&series, OUTAGE_THRESHOLD)?;
        let avg = average_dlr_profile(&series)?;
        Ok(ExperimentSummary {
            scenario: scenario.to_string(),
            algorithm,
            runs: runs.len(),
            outage_percent: outage.outage_percent,
            mean_dlr: avg.mean(),
            max_dlr: avg.max(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{DropReason, EventRecord};

    fn n(i: u32) -> NodeId {
        NodeId::of(i)
    }

    fn series(dlrs: &[f64]) -> DlrSeries {
        DlrSeries {
            windows: dlrs
                .iter()
                .enumerate()
                .map(|(i, &d)| DlrWindow {
                    second: i as u32,
                    sent: 85,
                    lost: (d * 85.0).round() as u32,
                    dlr: d,
                })
                .collect(),
        }
    }

    #[test]
    fn two_relay_geometry() {
        let s = build_two_relay(ProtocolConfig::predictive_olsr(), 1);
        let src = s.trace(SOURCE).unwrap();
        let turn = src.position_at(WARMUP.add_millis(80_000));
        assert!((turn.x - 850.0).abs() < 1e-9);
        assert_eq!(src.position_at(WARMUP), Position::ORIGIN);
        assert_eq!(src.position_at(s.duration), Position::ORIGIN);
        let speed = 2.0 * TWO_RELAY_REACH / 160.0;
        assert!((speed - 10.625).abs() < 1e-12);

        let relay = s.trace(n(3)).unwrap();
        let center = Position::new(300.0, 0.0, 0.0);
        for ms in (0..s.duration.as_millis()).step_by(37) {
            let r = relay
                .position_at(SimTime::from_millis(ms))
                .distance_to(&center);
            // chords between 100 ms waypoints sag by under 2 cm
            assert!((r - RELAY_RADIUS).abs() < 0.02, "t={ms} r={r}");
        }
        for (_, p) in relay.waypoints() {
            assert!((p.distance_to(&center) - RELAY_RADIUS).abs() < 1e-9);
        }
        assert_eq!(s.traffic.datagrams_per_second, 85);
        assert_eq!(s.traffic.end.saturating_sub(s.traffic.start), 160_000);
    }

    #[test]
    fn open_area_geometry() {
        let s = build_open_area(ProtocolConfig::olsr_etx(), 1);
        assert_eq!(s.nodes.len(), 32);
        let relays: Vec<Position> = (3..=32).map(|i| grid_position(n(i)).unwrap()).collect();
        let xs: Vec<f64> = relays.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = relays.iter().map(|p| p.y).collect();
        assert_eq!(xs.iter().cloned().fold(f64::MIN, f64::max), 1200.0);
        assert_eq!(ys.iter().cloned().fold(f64::MIN, f64::max), 1500.0);
        // every relay has a neighbor exactly one pitch away and none closer
        for (i, a) in relays.iter().enumerate() {
            let nearest = relays
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.distance_to(b))
                .fold(f64::MAX, f64::min);
            assert_eq!(nearest, 300.0);
        }
        let src = s.trace(SOURCE).unwrap();
        let moving: Vec<_> = src.waypoints().iter().skip(1).collect();
        let scan = moving.last().unwrap().0.saturating_sub(moving[0].0);
        assert_eq!(scan, 870_000);
    }

    #[test]
    fn builders_are_pure() {
        assert_eq!(
            build_two_relay(ProtocolConfig::olsr_etx(), 4),
            build_two_relay(ProtocolConfig::olsr_etx(), 4)
        );
        assert_eq!(
            build_open_area(ProtocolConfig::olsr_etx(), 4),
            build_open_area(ProtocolConfig::olsr_etx(), 4)
        );
    }

    fn rec(t: u64, node: u32, kind: EventKind) -> EventRecord {
        EventRecord {
            time: SimTime::from_millis(t),
            node: n(node),
            peer: None,
            kind,
        }
    }

    #[test]
    fn dlr_from_hand_built_log() {
        let plan =
            TrafficPlan::megabit_stream(n(2), n(1), SimTime::from_secs(10), SimTime::from_secs(13));
        let mut log = EventLog::default();
        // window 0: 4 sent, 3 received; window 1: 2 sent, 0 received;
        // window 2: 1 sent at the very end, received in the next second
        for (id, t) in [(0, 10_000), (1, 10_200), (2, 10_400), (3, 10_900)] {
            log.records.push(rec(t, 2, EventKind::DataTx { id }));
        }
        log.records
            .push(rec(11_000, 2, EventKind::DataTx { id: 4 }));
        log.records
            .push(rec(11_500, 2, EventKind::DataTx { id: 5 }));
        log.records
            .push(rec(12_999, 2, EventKind::DataTx { id: 6 }));
        for id in [0, 1, 3] {
            log.records
                .push(rec(10_950, 1, EventKind::DataRx { id, hops: 1 }));
        }
        log.records.push(rec(
            11_001,
            3,
            EventKind::DataDrop {
                id: 4,
                reason: DropReason::ChannelLoss,
            },
        ));
        log.records
            .push(rec(13_001, 1, EventKind::DataRx { id: 6, hops: 1 }));
        let s = compute_dlr(&log, &plan);
        let got: Vec<(u32, u32, u32)> = s
            .windows
            .iter()
            .map(|w| (w.second, w.sent, w.lost))
            .collect();
        assert_eq!(got, vec![(0, 4, 1), (1, 2, 2), (2, 1, 0)]);
        assert_eq!(s.windows[0].dlr, 0.25);
        assert_eq!(s.windows[1].dlr, 1.0);
    }

    #[test]
    fn seventeen_of_85_is_exactly_threshold() {
        let w = DlrWindow {
            second: 0,
            sent: 85,
            lost: 17,
            dlr: 17.0 / 85.0,
        };
        assert_eq!(w.dlr, 0.2);
        let s = DlrSeries { windows: vec![w] };
        assert_eq!(s.outage_percent(OUTAGE_THRESHOLD), 0.0);
    }

    #[test]
    fn outage_examples() {
        assert_eq!(
            outage_summary(&[series(&[0.0; 10])], 0.2)
                .unwrap()
                .outage_percent,
            0.0
        );
        let mut d = [0.0; 10];
        d[2] = 0.5;
        d[5] = 0.5;
        d[7] = 0.5;
        assert_eq!(
            outage_summary(&[series(&d)], 0.2).unwrap().outage_percent,
            30.0
        );
        let mut ten = [0.0; 10];
        ten[0] = 0.9;
        let both = [series(&ten), series(&d)];
        let s = outage_summary(&both, 0.2).unwrap();
        assert_eq!((s.outage_percent, s.runs), (20.0, 2));
        let swapped = [both[1].clone(), both[0].clone()];
        assert_eq!(outage_summary(&swapped, 0.2).unwrap(), s);
        assert!(outage_summary(&[], 0.2).is_err());
    }

    #[test]
    fn average_examples() {
        let one = series(&[0.1, 0.3]);
        assert_eq!(
            average_dlr_profile(std::slice::from_ref(&one)).unwrap(),
            one
        );
        let avg = average_dlr_profile(&[series(&[0.0; 4]), series(&[0.4; 4])]).unwrap();
        assert!(avg.windows.iter().all(|w| (w.dlr - 0.2).abs() < 1e-15));
        let fixture = [
            series(&[0.1, 0.2, 0.9]),
            series(&[0.3, 0.0, 0.6]),
            series(&[0.2, 0.1, 0.0]),
        ];
        let avg = average_dlr_profile(&fixture).unwrap();
        let want = [0.2, 0.1, 0.5];
        for (w, e) in avg.windows.iter().zip(want) {
            assert!((w.dlr - e).abs() < 1e-12);
        }
        assert!(matches!(
            average_dlr_profile(&[series(&[0.0; 3]), series(&[0.0; 2])]),
            Err(ScenarioError::MisalignedRuns { run: 1, .. })
        ));
    }

    #[test]
    fn dlr_csv_roundtrip() {
        let s = series(&[0.0, 1.0 / 3.0, 0.2, 1.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(DlrSeries::read_csv(buf.as_slice()).unwrap(), s);
        assert!(DlrSeries::read_csv("second,sent\n".as_bytes()).is_err());
    }

    #[test]
    fn hop_profile_and_collapse() {
        let plan =
            TrafficPlan::megabit_stream(n(2), n(1), SimTime::from_secs(1), SimTime::from_secs(5));
        let rc = |t, nh: Option<u32>, hops| {
            rec(
                t,
                2,
                EventKind::RouteChange {
                    destination: n(1),
                    next_hop: nh.map(n),
                    hops,
                },
            )
        };
        let log = EventLog {
            records: vec![
                rc(100, Some(1), 1),
                rc(2_400, Some(3), 2),
                rc(3_200, None, 0),
            ],
        };
        assert_eq!(
            hop_count_profile(&log, &plan),
            vec![Some(1), Some(2), None, None]
        );
        assert_eq!(
            collapse_runs(&[1, 1, 2, 3, 3, 2, 2, 1]),
            vec![1, 2, 3, 2, 1]
        );
        let modal = modal_hop_profile(&[
            vec![Some(1), Some(2)],
            vec![Some(1), Some(3)],
            vec![Some(2), Some(3)],
        ]);
        assert_eq!(modal, vec![Some(1), Some(3)]);
    }
}
