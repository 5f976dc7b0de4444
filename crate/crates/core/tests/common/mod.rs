//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use polsr::metrics::LinkCost;
use polsr::routing::Edge;
use polsr::wire::*;
use polsr::NodeId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> Vec<u8> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// Directed graph with costs that are multiples of 0.5 in [1, 10], so path
/// sums are exact and ties are common.
pub fn random_graph(rng: &mut ChaCha8Rng) -> (u32, Vec<Edge>) {
    let nodes = rng.gen_range(2..=8u32);
    let density = rng.gen_range(0.2..0.8);
    let mut edges = Vec::new();
    for from in 1..=nodes {
        for to in 1..=nodes {
            if from != to && rng.gen_bool(density) {
                let cost = rng.gen_range(2..=20u32) as f64 * 0.5;
                edges.push(Edge {
                    from: NodeId::of(from),
                    to: NodeId::of(to),
                    cost: LinkCost::new(cost).unwrap(),
                });
            }
        }
    }
    (nodes, edges)
}

/// Best (cost, next hop, hops) per destination over all simple paths.
pub fn enumerate(source: u32, nodes: u32, edges: &[Edge]) -> BTreeMap<u32, (f64, u32, u32)> {
    let mut adj: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for e in edges {
        adj.entry(e.from.get())
            .or_default()
            .push((e.to.get(), e.cost.value()));
    }
    let mut best: BTreeMap<u32, (f64, u32, u32)> = BTreeMap::new();
    let mut visited = vec![false; nodes as usize + 1];
    visited[source as usize] = true;

    fn dfs(
        at: u32,
        cost: f64,
        first: u32,
        hops: u32,
        adj: &BTreeMap<u32, Vec<(u32, f64)>>,
        visited: &mut Vec<bool>,
        best: &mut BTreeMap<u32, (f64, u32, u32)>,
    ) {
        for &(to, c) in adj.get(&at).map(Vec::as_slice).unwrap_or(&[]) {
            if visited[to as usize] {
                continue;
            }
            let first = if hops == 0 { to } else { first };
            let label = (cost + c, first, hops + 1);
            let better = best.get(&to).is_none_or(|b| label < *b);
            if better {
                best.insert(to, label);
            }
            visited[to as usize] = true;
            dfs(to, cost + c, first, hops + 1, adj, visited, best);
            visited[to as usize] = false;
        }
    }

    dfs(source, 0.0, 0, 0, &adj, &mut visited, &mut best);
    best
}

/// Random buffers, half of them starting from a valid encoding with bytes
/// flipped, so both the header and body paths get exercised.
pub fn fuzz_corpus(
    seed: u64,
    count: usize,
    valid: impl Fn(&mut ChaCha8Rng) -> Vec<u8>,
) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                let len = rng.gen_range(0..96);
                (0..len).map(|_| rng.gen()).collect()
            } else {
                let mut b = valid(&mut rng);
                for _ in 0..rng.gen_range(1..4) {
                    if b.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..b.len());
                    b[at] = rng.gen();
                }
                if rng.gen_bool(0.3) {
                    let keep = rng.gen_range(0..=b.len());
                    b.truncate(keep);
                }
                b
            }
        })
        .collect()
}

pub fn valid_hello(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let k = rng.gen_range(0..6);
    let msg = HelloMessage {
        htime: Htime::from_byte(rng.gen()),
        willingness: rng.gen_range(0..=7),
        position: PositionBlock {
            x: rng.gen(),
            y: rng.gen(),
            z: rng.gen(),
        },
        neighbors: (0..k)
            .map(|_| NeighborBlock {
                link_code: if rng.gen() {
                    LinkCode::SYMMETRIC
                } else {
                    LinkCode::ASYMMETRIC
                },
                neighbor: NodeId::of(rng.gen_range(1..50)),
                lq_forward: LqByte(rng.gen()),
            })
            .collect(),
    };
    encode_hello(&msg).unwrap()
}

pub fn valid_tc(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let k = rng.gen_range(0..6);
    encode_tc(&TcMessage {
        originator: NodeId::of(rng.gen_range(1..50)),
        ansn: rng.gen(),
        advertised: (0..k)
            .map(|_| TcEntry {
                neighbor: NodeId::of(rng.gen_range(1..50)),
                lq_forward: LqByte(rng.gen()),
                lq_reverse: LqByte(rng.gen()),
                speed: SpeedField(rng.gen()),
            })
            .collect(),
    })
}
