//! Benchmark fixtures shared by the criterion targets: deterministic random
//! graphs, feature indices, and interval sets at tunable sizes.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use mnemo_core::graph::{KnowledgeGraph, Triplet, TripletKind};
use mnemo_core::temporal::{SegmentId, TimeRange};
use mnemo_core::visual::VisualMemory;

pub fn graph_fixture(
    nodes: usize,
    edges: usize,
    seed: u64,
) -> (KnowledgeGraph, BTreeMap<String, f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..nodes).map(|i| format!("n{i:04}")).collect();
    let mut graph = KnowledgeGraph::new(TripletKind::Episodic);
    let triplets: Vec<Triplet> = (0..edges)
        .map(|k| {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            Triplet::new(
                TripletKind::Episodic,
                &names[a],
                &format!("p{k:05}"),
                &names[b],
                [SegmentId::new(format!("s{k:05}"))],
            )
            .unwrap()
        })
        .collect();
    graph.upsert_triplets(triplets);
    let seed_node = graph.nodes().next().unwrap().to_string();
    let seeds = BTreeMap::from([(seed_node, 1.0)]);
    (graph, seeds)
}

pub fn visual_fixture(entries: usize, dim: usize, seed: u64) -> (VisualMemory, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut memory = VisualMemory::new(30_000);
    for i in 0..entries {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let start = i as u64 * 30_000;
        memory
            .index_segment(
                SegmentId::new(format!("v{i:05}")),
                TimeRange::new(start, start + 30_000).unwrap(),
                v,
            )
            .unwrap();
    }
    let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (memory, query)
}

pub fn interval_fixture(count: usize, bound: u64, seed: u64) -> (Vec<TimeRange>, Vec<TimeRange>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let side = |rng: &mut ChaCha20Rng| -> Vec<TimeRange> {
        (0..count)
            .map(|_| {
                let start = rng.gen_range(0..bound - 1);
                let len = rng.gen_range(1..=(bound - start).min(10_000));
                TimeRange::new(start, start + len).unwrap()
            })
            .collect()
    };
    (side(&mut rng), side(&mut rng))
}
