//! Knowledge-graph store: entity nodes, triplet edges with segment
//! provenance, Personalized PageRank over the (default undirected)
//! adjacency, and endpoint-sum edge ranking.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{SegmentId, TimeRange};

/// Which memory a triplet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletKind {
    Episodic,
    Semantic,
}

/// Identity of an edge: the normalized (subject, predicate, object) strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TripletKey {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl std::fmt::Display for TripletKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}, {}]", self.subject, self.predicate, self.object)
    }
}

/// An entity–predicate–entity fact with the segments that support it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub kind: TripletKind,
    /// Supporting segment ids. Non-empty for episodic facts; may be empty
    /// only for consolidation-revised semantic facts.
    pub provenance: BTreeSet<SegmentId>,
}

impl Triplet {
    /// Build a normalized triplet. Subject and object go through
    /// [`normalize_entity`]; the predicate is normalized the same way but
    /// rejected as a validation error when empty.
    pub fn new(
        kind: TripletKind,
        subject: &str,
        predicate: &str,
        object: &str,
        provenance: impl IntoIterator<Item = SegmentId>,
    ) -> Result<Self> {
        let subject = normalize_entity(subject)?;
        let object = normalize_entity(object)?;
        let predicate = normalize_entity(predicate).map_err(|_| {
            Error::Validation(format!("empty predicate in ({subject}, ?, {object})"))
        })?;
        let provenance: BTreeSet<SegmentId> = provenance.into_iter().collect();
        if kind == TripletKind::Episodic && provenance.is_empty() {
            return Err(Error::Validation(format!(
                "episodic triplet ({subject}, {predicate}, {object}) requires provenance"
            )));
        }
        Ok(Triplet {
            subject,
            predicate,
            object,
            kind,
            provenance,
        })
    }

    pub fn key(&self) -> TripletKey {
        TripletKey {
            subject: self.subject.clone(),
            predicate: self.predicate.clone(),
            object: self.object.clone(),
        }
    }

    /// The text embedded when matching triplets by similarity.
    pub fn embedding_text(&self) -> String {
        format!("{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// Canonicalize an entity surface form: collapse whitespace, lowercase,
/// strip leading/trailing punctuation. Idempotent.
pub fn normalize_entity(surface: &str) -> Result<String> {
    const EDGE_PUNCT: &[char] = &[
        '\u{2018}', '\u{2019}', '\u{201c}', '\u{201d}', '\u{2013}', '\u{2014}', '\u{2026}',
    ];
    let trimmed = surface.trim_matches(|c: char| {
        c.is_whitespace() || c.is_ascii_punctuation() || EDGE_PUNCT.contains(&c)
    });
    let collapsed = trimmed.split_whitespace().collect::<Vec<_>>().join(" ");
    let lowered = collapsed.to_lowercase();
    if lowered.is_empty() {
        return Err(Error::DegenerateEntity(surface.to_string()));
    }
    Ok(lowered)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct NodeInfo {
    edges: BTreeSet<TripletKey>,
    segments: BTreeSet<SegmentId>,
}

/// Parameters of the Personalized PageRank power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_power_iters: usize,
    /// When set, probability flows subject → object only; default is the
    /// undirected adjacency (facts are directional, relevance is not).
    #[serde(default)]
    pub directed: bool,
}

impl Default for PprParams {
    fn default() -> Self {
        PprParams {
            damping: 0.85,
            tolerance: 1e-8,
            max_power_iters: 200,
            directed: false,
        }
    }
}

impl PprParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::invalid("ppr damping must lie in (0, 1)"));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("ppr tolerance must be positive"));
        }
        if self.max_power_iters == 0 {
            return Err(Error::invalid("ppr needs at least one power iteration"));
        }
        Ok(())
    }
}

/// Outcome of a PPR run. Scores sum to 1 within tolerance; `converged` is
/// false when the iteration budget ran out (the best iterate is returned).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PprResult {
    pub scores: BTreeMap<String, f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Report of a triplet batch upsert. Degenerate items are rejected
/// individually; the rest of the batch still lands.
#[derive(Debug, Default)]
pub struct UpsertReport {
    pub inserted: usize,
    pub merged: usize,
    pub rejected: Vec<(usize, Error)>,
}

/// Graph over canonical entity strings. A value is immutable once built for
/// a generation; writers produce the next generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    kind: TripletKind,
    #[serde(with = "edges_as_list")]
    edges: BTreeMap<TripletKey, Triplet>,
    nodes: BTreeMap<String, NodeInfo>,
    /// Known time ranges of provenance segments, used for deterministic
    /// tie-breaking. Registered by the owning memory as segments arrive.
    segment_ranges: BTreeMap<SegmentId, TimeRange>,
}

/// Edge values carry their own key, so the map serializes as a plain list.
mod edges_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        edges: &BTreeMap<TripletKey, Triplet>,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(edges.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<BTreeMap<TripletKey, Triplet>, D::Error> {
        let list = Vec::<Triplet>::deserialize(deserializer)?;
        Ok(list.into_iter().map(|t| (t.key(), t)).collect())
    }
}

impl KnowledgeGraph {
    pub fn new(kind: TripletKind) -> Self {
        KnowledgeGraph {
            kind,
            edges: BTreeMap::new(),
            nodes: BTreeMap::new(),
            segment_ranges: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> TripletKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn has_node(&self, node: &str) -> bool {
        self.nodes.contains_key(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Triplet> {
        self.edges.values()
    }

    pub fn edge(&self, key: &TripletKey) -> Option<&Triplet> {
        self.edges.get(key)
    }

    /// Segments incident to a node: the union of provenance over its edges.
    pub fn node_segments(&self, node: &str) -> Option<&BTreeSet<SegmentId>> {
        self.nodes.get(node).map(|info| &info.segments)
    }

    pub fn register_segment(&mut self, id: SegmentId, range: TimeRange) {
        self.segment_ranges.insert(id, range);
    }

    pub fn segment_range(&self, id: &SegmentId) -> Option<TimeRange> {
        self.segment_ranges.get(id).copied()
    }

    pub fn segment_ranges(&self) -> &BTreeMap<SegmentId, TimeRange> {
        &self.segment_ranges
    }

    /// Start of the earliest known provenance segment of a triplet;
    /// `u64::MAX` when none is registered.
    pub fn earliest_provenance_start(&self, triplet: &Triplet) -> u64 {
        triplet
            .provenance
            .iter()
            .filter_map(|id| self.segment_ranges.get(id))
            .map(|r| r.start_ms)
            .min()
            .unwrap_or(u64::MAX)
    }

    /// Insert or merge a batch. Duplicate (s, p, o) edges merge provenance
    /// sets; items of the wrong kind or with empty endpoints are rejected
    /// per-item while the batch continues.
    pub fn upsert_triplets(&mut self, triplets: impl IntoIterator<Item = Triplet>) -> UpsertReport {
        let mut report = UpsertReport::default();
        for (i, t) in triplets.into_iter().enumerate() {
            if t.kind != self.kind {
                report.rejected.push((
                    i,
                    Error::Validation(format!(
                        "triplet kind {:?} does not match graph kind {:?}",
                        t.kind, self.kind
                    )),
                ));
                continue;
            }
            if t.subject.is_empty() || t.object.is_empty() {
                report
                    .rejected
                    .push((i, Error::DegenerateEntity(t.key().to_string())));
                continue;
            }
            self.attach(t.key(), &t);
            match self.edges.entry(t.key()) {
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    e.get_mut().provenance.extend(t.provenance);
                    report.merged += 1;
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(t);
                    report.inserted += 1;
                }
            }
        }
        report
    }

    fn attach(&mut self, key: TripletKey, t: &Triplet) {
        for endpoint in [&t.subject, &t.object] {
            let info = self.nodes.entry(endpoint.clone()).or_default();
            info.edges.insert(key.clone());
            info.segments.extend(t.provenance.iter().cloned());
        }
    }

    /// Remove one edge; endpoints left with no edges are dropped and
    /// incidence is recomputed for the survivors.
    pub fn remove_edge(&mut self, key: &TripletKey) -> Option<Triplet> {
        let removed = self.edges.remove(key)?;
        for endpoint in [removed.subject.clone(), removed.object.clone()] {
            let Some(info) = self.nodes.get_mut(&endpoint) else {
                continue;
            };
            info.edges.remove(key);
            if info.edges.is_empty() {
                self.nodes.remove(&endpoint);
            } else {
                info.segments = info
                    .edges
                    .iter()
                    .filter_map(|k| self.edges.get(k))
                    .flat_map(|t| t.provenance.iter().cloned())
                    .collect();
            }
        }
        Some(removed)
    }

    /// Personalized PageRank by power iteration on the column-stochastic
    /// transition matrix: `score ← (1 − d)·seed + d·W·score`, converged when
    /// the L1 delta drops below tolerance. Isolated nodes self-loop so the
    /// matrix stays stochastic.
    pub fn ppr(&self, seeds: &BTreeMap<String, f64>, params: &PprParams) -> Result<PprResult> {
        params.validate()?;
        if seeds.is_empty() {
            return Err(Error::invalid("ppr requires a non-empty seed map"));
        }
        for (node, &w) in seeds {
            if !self.nodes.contains_key(node) {
                return Err(Error::UnknownNode(node.clone()));
            }
            if w.is_nan() || w < 0.0 {
                return Err(Error::invalid(format!(
                    "seed weight for {node:?} must be a non-negative number"
                )));
            }
        }
        let total: f64 = seeds.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "seed weights must sum to 1 (got {total})"
            )));
        }

        let index: BTreeMap<&str, usize> = self
            .nodes
            .keys()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let n = index.len();

        // Weighted adjacency with parallel-edge multiplicity. out[v] lists
        // (target, weight); deg[v] is the total outgoing weight.
        let mut out: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for t in self.edges.values() {
            let s = index[t.subject.as_str()];
            let o = index[t.object.as_str()];
            *out[s].entry(o).or_insert(0.0) += 1.0;
            if !params.directed && s != o {
                *out[o].entry(s).or_insert(0.0) += 1.0;
            }
        }
        for (v, targets) in out.iter_mut().enumerate() {
            if targets.is_empty() {
                targets.insert(v, 1.0);
            }
        }
        let deg: Vec<f64> = out.iter().map(|t| t.values().sum()).collect();

        let mut seed_vec = vec![0.0; n];
        for (node, &w) in seeds {
            seed_vec[index[node.as_str()]] = w;
        }

        let mut scores = seed_vec.clone();
        let mut next = vec![0.0; n];
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..params.max_power_iters {
            iterations += 1;
            for (i, s) in seed_vec.iter().enumerate() {
                next[i] = (1.0 - params.damping) * s;
            }
            for v in 0..n {
                let share = params.damping * scores[v] / deg[v];
                for (&u, &w) in &out[v] {
                    next[u] += share * w;
                }
            }
            let delta: f64 = scores
                .iter()
                .zip(next.iter())
                .map(|(a, b)| (a - b).abs())
                .sum();
            std::mem::swap(&mut scores, &mut next);
            if delta < params.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "ppr did not converge within {} iterations (graph of {} nodes)",
                params.max_power_iters,
                n
            );
        }
        let scores = self
            .nodes
            .keys()
            .zip(scores)
            .map(|(node, s)| (node.clone(), s))
            .collect();
        Ok(PprResult {
            scores,
            converged,
            iterations,
        })
    }

    /// Rank every edge by the sum of its endpoints' node scores, descending.
    /// Ties break by earliest provenance start, then (s, p, o) order.
    pub fn edge_scores<'a>(
        &'a self,
        node_scores: &BTreeMap<String, f64>,
    ) -> Result<Vec<(&'a Triplet, f64)>> {
        let mut scored = Vec::with_capacity(self.edges.len());
        for t in self.edges.values() {
            let s = node_scores
                .get(&t.subject)
                .ok_or_else(|| Error::MissingNodeScore(t.subject.clone()))?;
            let o = node_scores
                .get(&t.object)
                .ok_or_else(|| Error::MissingNodeScore(t.object.clone()))?;
            scored.push((t, s + o));
        }
        scored.sort_by(|(a, sa), (b, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    self.earliest_provenance_start(a)
                        .cmp(&self.earliest_provenance_start(b))
                })
                .then_with(|| a.key().cmp(&b.key()))
        });
        Ok(scored)
    }
}
