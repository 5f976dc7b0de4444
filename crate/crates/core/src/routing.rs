//! Per-node protocol engine: neighbor sensing through Hellos, topology
//! dissemination through flooded TCs, and shortest paths over ETX.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::metrics::{link_cost, HelloObservation, LinkCost, LinkQualityState, MetricError};
use crate::model::{NodeId, Position, ProtocolConfig, SimTime};
use crate::wire::{
    seq_newer, HelloMessage, Htime, LinkCode, LqByte, NeighborBlock, PositionBlock, SpeedField,
    TcEntry, TcMessage, WireError,
};

/// OLSR default willingness.
pub const WILL_DEFAULT: u8 = 3;
/// How long a seen (originator, ANSN) pair is remembered.
const DUPLICATE_HOLD_MS: u64 = 30_000;
/// Duplicate entries may outlive their hold by up to this much.
const DUPLICATE_PRUNE_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("node {0} received its own Hello")]
    OwnHello(NodeId),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One directed link usable by the route computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub cost: LinkCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub next_hop: NodeId,
    pub cost: LinkCost,
    pub hops: u32,
}

pub type RoutingTable = BTreeMap<NodeId, Route>;

/// A destination whose next hop or hop count changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteDelta {
    pub destination: NodeId,
    /// `(next_hop, hops)`; `None` when the destination is unreachable.
    pub before: Option<(NodeId, u32)>,
    pub after: Option<(NodeId, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Label {
    cost: LinkCost,
    next_hop: NodeId,
    hops: u32,
}

/// Minimum-cost routes from `source` over `edges`.
///
/// Among equal-cost paths the smaller first hop wins, then the smaller hop
/// count. Edges with infinite cost are ignored.
pub fn shortest_paths(source: NodeId, edges: &[Edge]) -> RoutingTable {
    let usable = || {
        edges
            .iter()
            .filter(|e| e.cost.is_finite() && e.from != e.to)
    };
    let mut ids: Vec<NodeId> = usable().flat_map(|e| [e.from, e.to]).collect();
    ids.push(source);
    ids.sort_unstable();
    ids.dedup();
    let index = |id: NodeId| ids.binary_search(&id).expect("id collected above");
    let mut adjacency: Vec<Vec<(usize, LinkCost)>> = vec![Vec::new(); ids.len()];
    for e in usable() {
        adjacency[index(e.from)].push((index(e.to), e.cost));
    }

    let src = index(source);
    let mut best: Vec<Option<Label>> = vec![None; ids.len()];
    let mut settled = vec![false; ids.len()];
    settled[src] = true;
    let mut heap = BinaryHeap::new();

    for &(to, cost) in &adjacency[src] {
        let label = Label {
            cost,
            next_hop: ids[to],
            hops: 1,
        };
        if best[to].is_none_or(|b| label < b) {
            best[to] = Some(label);
            heap.push(Reverse((label, to)));
        }
    }

    while let Some(Reverse((label, node))) = heap.pop() {
        if settled[node] {
            continue;
        }
        settled[node] = true;
        for &(to, cost) in &adjacency[node] {
            if settled[to] {
                continue;
            }
            let next = Label {
                cost: label.cost + cost,
                next_hop: label.next_hop,
                hops: label.hops + 1,
            };
            if best[to].is_none_or(|b| next < b) {
                best[to] = Some(next);
                heap.push(Reverse((next, to)));
            }
        }
    }

    best.into_iter()
        .zip(&ids)
        .filter_map(|(l, &dest)| {
            let l = l?;
            Some((
                dest,
                Route {
                    next_hop: l.next_hop,
                    cost: l.cost,
                    hops: l.hops,
                },
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologyEntry {
    pub cost: LinkCost,
    pub freshness: SimTime,
    pub seq: u16,
}

/// Links learned from other nodes' TCs, keyed by `(originator, neighbor)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologyDatabase {
    links: BTreeMap<(NodeId, NodeId), TopologyEntry>,
    last_seq: BTreeMap<NodeId, u16>,
    /// No entry is older than this, so expiry scans before it are no-ops.
    oldest: Option<SimTime>,
}

impl TopologyDatabase {
    pub fn get(&self, from: NodeId, to: NodeId) -> Option<&TopologyEntry> {
        self.links.get(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &TopologyEntry)> {
        self.links.iter()
    }

    pub fn last_seq(&self, originator: NodeId) -> Option<u16> {
        self.last_seq.get(&originator).copied()
    }

    /// Replaces everything `tc.originator` advertised before. Returns `None`
    /// when the ANSN is not newer than the last one accepted, otherwise
    /// whether any advertised link or cost differs from before.
    fn apply(&mut self, tc: &TcMessage, now: SimTime, config: &ProtocolConfig) -> Option<bool> {
        if let Some(&last) = self.last_seq.get(&tc.originator) {
            if !seq_newer(tc.ansn, last) {
                return None;
            }
        }
        self.last_seq.insert(tc.originator, tc.ansn);
        let orig = tc.originator;
        let range = (orig, NodeId::of(1))..=(orig, NodeId::of(u32::MAX));
        let old: Vec<(NodeId, LinkCost)> = self
            .links
            .range(range.clone())
            .map(|(k, e)| (k.1, e.cost))
            .collect();
        let mut fresh: Vec<(NodeId, LinkCost)> = tc
            .advertised
            .iter()
            .map(|e| {
                let cost = link_cost(
                    e.lq_forward.ratio(),
                    e.lq_reverse.ratio(),
                    e.speed.mps(),
                    config,
                );
                (e.neighbor, cost)
            })
            .collect();
        fresh.sort_by_key(|&(n, _)| n);
        fresh.dedup_by_key(|&mut (n, _)| n);
        let changed = old != fresh;
        if changed {
            let stale: Vec<(NodeId, NodeId)> = self.links.range(range).map(|(k, _)| *k).collect();
            for k in stale {
                self.links.remove(&k);
            }
        }
        if !fresh.is_empty() {
            self.oldest = Some(self.oldest.map_or(now, |t| t.min(now)));
        }
        for (neighbor, cost) in fresh {
            self.links.insert(
                (orig, neighbor),
                TopologyEntry {
                    cost,
                    freshness: now,
                    seq: tc.ansn,
                },
            );
        }
        Some(changed)
    }

    fn expire(&mut self, now: SimTime, hold_ms: u64) -> bool {
        match self.oldest {
            Some(t) if t.add_millis(hold_ms) <= now => {}
            _ => return false,
        }
        let before = self.links.len();
        self.links
            .retain(|_, e| e.freshness.add_millis(hold_ms) > now);
        self.oldest = self.links.values().map(|e| e.freshness).min();
        before != self.links.len()
    }
}

/// The protocol instance running on one node.
#[derive(Debug, Clone)]
pub struct OlsrNode {
    id: NodeId,
    position: Position,
    config: ProtocolConfig,
    neighbors: BTreeMap<NodeId, LinkQualityState>,
    heard: BTreeSet<NodeId>,
    topology: TopologyDatabase,
    routes: RoutingTable,
    routes_dirty: bool,
    hello_seq: u32,
    tc_seq: u16,
    duplicates: BTreeMap<(NodeId, u16), SimTime>,
    next_duplicate_prune: SimTime,
}

impl OlsrNode {
    pub fn new(id: NodeId, position: Position, config: ProtocolConfig) -> Self {
        OlsrNode {
            id,
            position,
            config,
            neighbors: BTreeMap::new(),
            heard: BTreeSet::new(),
            topology: TopologyDatabase::default(),
            routes: RoutingTable::new(),
            routes_dirty: false,
            hello_seq: 0,
            tc_seq: 0,
            duplicates: BTreeMap::new(),
            next_duplicate_prune: SimTime::ZERO,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn set_position(&mut self, p: Position) {
        self.position = p;
    }

    pub fn neighbor(&self, id: NodeId) -> Option<&LinkQualityState> {
        self.neighbors.get(&id)
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &LinkQualityState> {
        self.neighbors.values()
    }

    pub fn neighbor_mut(&mut self, id: NodeId) -> Option<&mut LinkQualityState> {
        self.routes_dirty = true;
        self.neighbors.get_mut(&id)
    }

    pub fn topology(&self) -> &TopologyDatabase {
        &self.topology
    }

    pub fn hello_seq(&self) -> u32 {
        self.hello_seq
    }

    pub fn tc_seq(&self) -> u16 {
        self.tc_seq
    }

    pub fn generate_hello(&mut self, _now: SimTime) -> Result<HelloMessage, RoutingError> {
        self.hello_seq = self.hello_seq.wrapping_add(1);
        let neighbors = self
            .neighbors
            .values()
            .map(|s| NeighborBlock {
                link_code: if s.is_symmetric() {
                    LinkCode::SYMMETRIC
                } else {
                    LinkCode::ASYMMETRIC
                },
                neighbor: s.neighbor,
                lq_forward: LqByte::quantize(s.r_forward),
            })
            .collect();
        Ok(HelloMessage {
            htime: Htime::from_secs(self.config.hello_interval)?,
            willingness: WILL_DEFAULT,
            position: PositionBlock::from_position(self.position)?,
            neighbors,
        })
    }

    /// Closes one Hello interval: every neighbor not heard since the previous
    /// call gets a missed-probe update.
    pub fn sample_links(&mut self, now: SimTime) -> Result<(), RoutingError> {
        for (id, state) in self.neighbors.iter_mut() {
            if !self.heard.contains(id) {
                state.observe(HelloObservation::Missed, now, &self.config)?;
            }
        }
        self.heard.clear();
        self.routes_dirty = true;
        Ok(())
    }

    pub fn process_hello(
        &mut self,
        hello: &HelloMessage,
        sender: NodeId,
        seq: u32,
        now: SimTime,
    ) -> Result<(), RoutingError> {
        if sender == self.id {
            return Err(RoutingError::OwnHello(sender));
        }
        let distance = hello.position.position().distance_to(&self.position);
        let reported_reverse = hello
            .neighbors
            .iter()
            .find(|b| b.neighbor == self.id)
            .map(|b| b.lq_forward.ratio());
        let mut state = self
            .neighbors
            .get(&sender)
            .cloned()
            .unwrap_or_else(|| LinkQualityState::new(sender));
        state.observe(
            HelloObservation::Received {
                seq,
                reported_reverse,
                distance: Some(distance),
            },
            now,
            &self.config,
        )?;
        self.neighbors.insert(sender, state);
        self.heard.insert(sender);
        self.routes_dirty = true;
        Ok(())
    }

    pub fn generate_tc(&mut self, now: SimTime) -> TcMessage {
        self.tc_seq = self.tc_seq.wrapping_add(1);
        let advertised = self
            .neighbors
            .values()
            .filter(|s| s.is_symmetric() && s.expiry > now)
            .map(|s| TcEntry {
                neighbor: s.neighbor,
                lq_forward: LqByte::quantize(s.r_forward),
                lq_reverse: LqByte::quantize(s.r_reverse),
                speed: SpeedField::from_mps(s.speed.v),
            })
            .collect();
        TcMessage {
            originator: self.id,
            ansn: self.tc_seq,
            advertised,
        }
    }

    /// Stores a TC and reports whether it should be re-broadcast.
    pub fn process_tc(&mut self, tc: &TcMessage, now: SimTime) -> bool {
        if tc.originator == self.id {
            return false;
        }
        let key = (tc.originator, tc.ansn);
        if self.duplicates.contains_key(&key) {
            return false;
        }
        self.duplicates.insert(key, now);
        match self.topology.apply(tc, now, &self.config) {
            None => false,
            Some(changed) => {
                self.routes_dirty |= changed;
                true
            }
        }
    }

    /// Drops expired neighbors, topology links and duplicate records.
    pub fn expire(&mut self, now: SimTime) {
        let before = self.neighbors.len();
        self.neighbors.retain(|_, s| s.expiry > now);
        if self.neighbors.len() != before {
            self.heard.retain(|id| self.neighbors.contains_key(id));
            self.routes_dirty = true;
        }
        if self.topology.expire(now, self.config.topology_hold_ms()) {
            self.routes_dirty = true;
        }
        if now >= self.next_duplicate_prune {
            self.duplicates
                .retain(|_, seen| seen.add_millis(DUPLICATE_HOLD_MS) > now);
            self.next_duplicate_prune = now.add_millis(DUPLICATE_PRUNE_MS);
        }
    }

    /// Directed links the route computation sees at `now`.
    pub fn edges(&self, now: SimTime) -> Vec<Edge> {
        let hold = self.config.topology_hold_ms();
        let local = self
            .neighbors
            .values()
            .filter(|s| s.expiry > now)
            .map(|s| Edge {
                from: self.id,
                to: s.neighbor,
                cost: s.cost(&self.config),
            });
        let remote = self
            .topology
            .iter()
            .filter(|((from, _), e)| *from != self.id && e.freshness.add_millis(hold) > now)
            .map(|(&(from, to), e)| Edge {
                from,
                to,
                cost: e.cost,
            });
        local.chain(remote).filter(|e| e.cost.is_finite()).collect()
    }

    pub fn compute_routes(&self, now: SimTime) -> RoutingTable {
        shortest_paths(self.id, &self.edges(now))
    }

    /// Current table; recomputed first if anything changed since the last call.
    pub fn routes(&mut self, now: SimTime) -> &RoutingTable {
        self.refresh_routes(now);
        &self.routes
    }

    pub fn route_to(&mut self, dest: NodeId, now: SimTime) -> Option<Route> {
        self.routes(now).get(&dest).copied()
    }

    /// Recomputes if needed and lists destinations whose next hop or hop
    /// count changed.
    pub fn refresh_routes(&mut self, now: SimTime) -> Vec<RouteDelta> {
        if !self.routes_dirty {
            return Vec::new();
        }
        self.routes_dirty = false;
        let fresh = self.compute_routes(now);
        let deltas = diff_tables(&self.routes, &fresh);
        self.routes = fresh;
        deltas
    }
}

fn diff_tables(old: &RoutingTable, new: &RoutingTable) -> Vec<RouteDelta> {
    let dests: BTreeSet<NodeId> = old.keys().chain(new.keys()).copied().collect();
    dests
        .into_iter()
        .filter_map(|d| {
            let before = old.get(&d).map(|r| (r.next_hop, r.hops));
            let after = new.get(&d).map(|r| (r.next_hop, r.hops));
            (before != after).then_some(RouteDelta {
                destination: d,
                before,
                after,
            })
        })
        .collect()
}
