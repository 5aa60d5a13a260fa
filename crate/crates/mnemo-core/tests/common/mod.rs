//! Shared test support: independent oracle implementations (kept strictly
//! apart from the engine code paths they check) and random fixture
//! generators.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use mnemo_core::graph::{KnowledgeGraph, Triplet, TripletKind};
use mnemo_core::memory::Memories;
use mnemo_core::semantic::{ConsolidationRecord, SemanticMemory};
use mnemo_core::temporal::{Segment, SegmentId, TimeRange, TimescaleConfig};

pub mod oracles {
    use std::collections::BTreeMap;

    /// Dense Personalized PageRank by explicit transition-matrix power
    /// iteration. Convention mirrors the engine contract: undirected
    /// adjacency with parallel-edge multiplicity, a self-loop on isolated
    /// nodes, column-stochastic W, `score ← (1−d)·seed + d·W·score`.
    #[allow(clippy::needless_range_loop)] // textbook matrix indexing
    pub fn dense_ppr(
        n: usize,
        edges: &[(usize, usize)],
        seeds: &BTreeMap<usize, f64>,
        damping: f64,
        tolerance: f64,
        max_iters: usize,
    ) -> Vec<f64> {
        let mut weight = vec![vec![0.0f64; n]; n];
        for &(a, b) in edges {
            if a == b {
                weight[a][a] += 1.0;
            } else {
                weight[a][b] += 1.0;
                weight[b][a] += 1.0;
            }
        }
        for v in 0..n {
            if (0..n).all(|u| weight[u][v] == 0.0) {
                weight[v][v] = 1.0;
            }
        }
        // Column-stochastic transition matrix.
        let mut w = vec![vec![0.0f64; n]; n];
        for v in 0..n {
            let deg: f64 = (0..n).map(|u| weight[u][v]).sum();
            for u in 0..n {
                w[u][v] = weight[u][v] / deg;
            }
        }
        let mut seed_vec = vec![0.0; n];
        for (&i, &mass) in seeds {
            seed_vec[i] = mass;
        }
        let mut scores = seed_vec.clone();
        for _ in 0..max_iters {
            let mut next = vec![0.0; n];
            for u in 0..n {
                let mut acc = 0.0;
                for v in 0..n {
                    acc += w[u][v] * scores[v];
                }
                next[u] = (1.0 - damping) * seed_vec[u] + damping * acc;
            }
            let delta: f64 = scores.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
            scores = next;
            if delta < tolerance {
                break;
            }
        }
        scores
    }

    /// 1 ms-discretized temporal IoU: mark bins, count.
    pub fn brute_tiou(retrieved: &[(u64, u64)], truth: &[(u64, u64)], bound_ms: usize) -> f64 {
        let mut a = vec![false; bound_ms];
        let mut b = vec![false; bound_ms];
        for &(s, e) in retrieved {
            for bin in a.iter_mut().take(e as usize).skip(s as usize) {
                *bin = true;
            }
        }
        for &(s, e) in truth {
            for bin in b.iter_mut().take(e as usize).skip(s as usize) {
                *bin = true;
            }
        }
        let mut inter = 0u64;
        let mut union = 0u64;
        for i in 0..bound_ms {
            inter += (a[i] && b[i]) as u64;
            union += (a[i] || b[i]) as u64;
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Exhaustive endpoint-sum edge ranking under the documented tie-break:
    /// score desc, earliest provenance start asc (missing = max), key asc.
    pub fn rank_edges_exhaustive(
        edges: &[(String, String, String)],
        node_scores: &BTreeMap<String, f64>,
        provenance_start: &BTreeMap<(String, String, String), u64>,
    ) -> Vec<(String, String, String)> {
        let mut scored: Vec<((String, String, String), f64, u64)> = edges
            .iter()
            .map(|key| {
                let score = node_scores[&key.0] + node_scores[&key.2];
                let start = provenance_start.get(key).copied().unwrap_or(u64::MAX);
                (key.clone(), score, start)
            })
            .collect();
        scored.sort_by(|(ka, sa, pa), (kb, sb, pb)| {
            sb.partial_cmp(sa)
                .unwrap()
                .then_with(|| pa.cmp(pb))
                .then_with(|| ka.cmp(kb))
        });
        scored.into_iter().map(|(k, _, _)| k).collect()
    }

    /// Full-scan argsort top-k by cosine with (similarity desc, start asc,
    /// id asc) ordering.
    pub fn brute_top_k(
        entries: &[(String, u64, Vec<f64>)],
        query_unit: &[f64],
        k: usize,
    ) -> Vec<String> {
        let mut scored: Vec<(f64, u64, &str)> = entries
            .iter()
            .map(|(id, start, v)| {
                let mut sim = 0.0;
                for (a, b) in v.iter().zip(query_unit) {
                    sim += a * b;
                }
                (sim, *start, id.as_str())
            })
            .collect();
        scored.sort_by(|(sa, ta, ia), (sb, tb, ib)| {
            sb.partial_cmp(sa)
                .unwrap()
                .then_with(|| ta.cmp(tb))
                .then_with(|| ia.cmp(ib))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(_, _, id)| id.to_string())
            .collect()
    }

    /// The uniform subsample index formula, recomputed independently.
    pub fn subsample_indices(n: usize, m: usize) -> Vec<usize> {
        if n == 0 || m == 0 {
            return Vec::new();
        }
        if n <= m {
            return (0..n).collect();
        }
        if m == 1 {
            return vec![0];
        }
        (0..m).map(|i| (i * (n - 1)) / (m - 1)).collect()
    }
}

/// A random multigraph fixture with node names `n00..`, parallel edges and
/// occasional self-loops, plus registered provenance ranges for tie-breaks.
pub struct RandomGraph {
    pub node_names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub graph: KnowledgeGraph,
}

pub fn random_graph(rng: &mut ChaCha20Rng, max_nodes: usize, max_edges: usize) -> RandomGraph {
    let n = rng.gen_range(1..=max_nodes);
    // Every node also gets one anchor self-edge below, so keep the total
    // edge count within the requested bound.
    let m = rng.gen_range(0..=max_edges.saturating_sub(n));
    let node_names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let mut edges = Vec::with_capacity(m);
    let mut graph = KnowledgeGraph::new(TripletKind::Episodic);
    let mut triplets = Vec::with_capacity(m + n);
    for k in 0..m {
        let a = rng.gen_range(0..n);
        let b = if rng.gen_bool(0.05) {
            a
        } else {
            rng.gen_range(0..n)
        };
        edges.push((a, b));
        let seg = SegmentId::new(format!("s{k:03}"));
        graph.register_segment(
            seg.clone(),
            TimeRange::new(k as u64 * 10, k as u64 * 10 + 10).unwrap(),
        );
        triplets.push(
            Triplet::new(
                TripletKind::Episodic,
                &node_names[a],
                &format!("p{k:03}"),
                &node_names[b],
                [seg],
            )
            .unwrap(),
        );
    }
    // Anchor every node so isolated nodes exist in the graph too.
    for (i, name) in node_names.iter().enumerate() {
        let seg = SegmentId::new(format!("anchor{i:02}"));
        graph.register_segment(
            seg.clone(),
            TimeRange::new(1_000_000 + i as u64, 1_000_001 + i as u64).unwrap(),
        );
        triplets.push(Triplet::new(TripletKind::Episodic, name, "anchors", name, [seg]).unwrap());
        edges.push((i, i));
    }
    let report = graph.upsert_triplets(triplets);
    assert!(report.rejected.is_empty());
    RandomGraph {
        node_names,
        edges,
        graph,
    }
}

pub fn random_seeds(rng: &mut ChaCha20Rng, n: usize) -> BTreeMap<usize, f64> {
    let count = rng.gen_range(1..=3.min(n));
    let mut picked: Vec<usize> = (0..n).collect();
    picked.shuffle(rng);
    picked.truncate(count);
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| (i, 1.0 / count as f64))
        .collect()
}

/// A random but invariant-consistent set of memories for persistence tests.
pub fn random_memories(rng: &mut ChaCha20Rng) -> Memories {
    let scales: Vec<u64> = match rng.gen_range(0..3) {
        0 => vec![10_000, 60_000],
        1 => vec![30_000, 180_000, 600_000],
        _ => vec![5_000],
    };
    let visual_scale = scales[0];
    let config = TimescaleConfig::new(scales.clone(), 60_000, visual_scale).unwrap();
    let mut memories = Memories::new(config);

    // Episodic: segments tiling a random prefix, random triplets over them.
    let words = ["alice", "bob", "kettle", "garden", "ladder", "sofa", "dave"];
    let mut parts: BTreeMap<u64, (Vec<Segment>, Vec<Triplet>)> = BTreeMap::new();
    for &scale in &scales {
        let count = rng.gen_range(0..6usize);
        let mut segments = Vec::new();
        for i in 0..count {
            let start = i as u64 * scale;
            segments.push(
                Segment::new(
                    format!("seg{scale}_{i}"),
                    TimeRange::new(start, start + scale).unwrap(),
                    scale,
                    format!("caption {i} at scale {scale}"),
                    if rng.gen_bool(0.3) {
                        Some(format!("transcript {i}"))
                    } else {
                        None
                    },
                )
                .unwrap(),
            );
        }
        let mut triplets = Vec::new();
        for _ in 0..rng.gen_range(0..10usize) {
            if segments.is_empty() {
                break;
            }
            let seg = &segments[rng.gen_range(0..segments.len())];
            triplets.push(
                Triplet::new(
                    TripletKind::Episodic,
                    words[rng.gen_range(0..words.len())],
                    "relates to",
                    words[rng.gen_range(0..words.len())],
                    [seg.id.clone()],
                )
                .unwrap(),
            );
        }
        parts.insert(scale, (segments, triplets));
    }
    memories.episodic =
        mnemo_core::episodic::EpisodicMemory::restore(memories.episodic.config().clone(), parts)
            .unwrap();

    // Semantic: a random journal, replayed.
    let mut journal: Vec<ConsolidationRecord> = Vec::new();
    let mut live: Vec<Triplet> = Vec::new();
    let generations = rng.gen_range(0..5usize);
    for g in 0..generations {
        let incoming: Vec<Triplet> = (0..rng.gen_range(1..4usize))
            .map(|i| {
                Triplet::new(
                    TripletKind::Semantic,
                    words[rng.gen_range(0..words.len())],
                    &format!("habit {g}{i}"),
                    words[rng.gen_range(0..words.len())],
                    [],
                )
                .unwrap()
            })
            .collect();
        let mut removed = Vec::new();
        if !live.is_empty() && rng.gen_bool(0.5) {
            removed.push(live[rng.gen_range(0..live.len())].clone());
        }
        let record = ConsolidationRecord {
            generation: g as u64 + 1,
            incoming: incoming.clone(),
            removed: removed.clone(),
            updated: incoming.clone(),
            match_pairs: Vec::new(),
            segment_ranges: BTreeMap::new(),
        };
        for r in &removed {
            live.retain(|t| t.key() != r.key());
        }
        live.extend(incoming);
        journal.push(record);
    }
    memories.semantic = SemanticMemory::from_journal(journal).unwrap();

    // Visual: features tiling a random prefix, strictly increasing frames.
    let feature_count = rng.gen_range(0..8usize);
    let dim = rng.gen_range(2..6usize);
    for i in 0..feature_count {
        let start = i as u64 * visual_scale;
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = if v.iter().all(|x| *x == 0.0) {
            vec![1.0; dim]
        } else {
            v
        };
        memories
            .visual
            .index_segment(
                SegmentId::new(format!("v{i}")),
                TimeRange::new(start, start + visual_scale).unwrap(),
                v,
            )
            .unwrap();
    }
    let mut t = 0u64;
    for i in 0..rng.gen_range(0..10usize) {
        t += rng.gen_range(1..5_000u64);
        memories
            .visual
            .register_frame(t, format!("frames/{i:04}.jpg"))
            .unwrap();
    }
    memories
}
