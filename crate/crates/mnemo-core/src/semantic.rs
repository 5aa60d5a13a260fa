//! Evolving semantic memory: triplet extraction over fixed windows,
//! embedding-gated matching, judge-driven consolidation following the set
//! algebra `next = (prev \ removed) ∪ updated`, and edge-ranked retrieval.
//! The append-only journal is the durability primitive; replaying it from
//! empty reproduces the graph exactly.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{
    complete, cosine, embed_unit, parse_judge_decision, parse_semantic_extraction, BackendSet,
    Role, TemplateId,
};
use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triplet, TripletKey, TripletKind};
use crate::seeding::{query_entities, query_seeds};
use crate::temporal::{SegmentId, TimeRange};

/// One caption (or other episodic item) of a semantic window, with its
/// provenance segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionItem {
    pub segment_id: SegmentId,
    pub range: TimeRange,
    pub text: String,
}

/// A similarity match between an existing edge and an incoming triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub existing: TripletKey,
    pub incoming_index: usize,
    pub similarity: f64,
}

/// Everything one consolidation did, sufficient to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidationRecord {
    pub generation: u64,
    pub incoming: Vec<Triplet>,
    pub removed: Vec<Triplet>,
    pub updated: Vec<Triplet>,
    pub match_pairs: Vec<MatchPair>,
    /// Time ranges of provenance segments first seen in this generation.
    pub segment_ranges: BTreeMap<SegmentId, TimeRange>,
}

/// Extraction output: triplets aligned with the evidence index lists that
/// point back into the input items.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticBatch {
    pub triplets: Vec<Triplet>,
    pub evidence: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMemory {
    graph: KnowledgeGraph,
    generation: u64,
    journal: Vec<ConsolidationRecord>,
}

/// Semantic retrieval output; `no_seed` flags a query that matched nothing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticRetrieval {
    pub triplets: Vec<(Triplet, f64)>,
    pub no_seed: bool,
}

impl Default for SemanticMemory {
    fn default() -> Self {
        Self::new()
    }
}

impl SemanticMemory {
    pub fn new() -> Self {
        SemanticMemory {
            graph: KnowledgeGraph::new(TripletKind::Semantic),
            generation: 0,
            journal: Vec::new(),
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn journal(&self) -> &[ConsolidationRecord] {
        &self.journal
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty() && self.journal.is_empty()
    }

    /// Extract semantic triplets from one window of captions. The backend
    /// must return aligned triple/evidence lists; each triplet's provenance
    /// is the union of the segments its evidence indices point at.
    pub fn extract_semantic(items: &[CaptionItem], backends: &BackendSet) -> Result<SemanticBatch> {
        if items.is_empty() {
            return Err(Error::invalid(
                "semantic extraction needs at least one caption",
            ));
        }
        let extractor = backends.get(Role::Extractor)?;
        let raw = complete(
            extractor,
            TemplateId::SemanticExtraction,
            &extraction_inputs(items),
            &[],
        )?;
        let parsed = parse_semantic_extraction(&raw)?;

        let mut triplets = Vec::with_capacity(parsed.semantic_triples.len());
        let mut evidence = Vec::with_capacity(parsed.episodic_evidence.len());
        for ([s, p, o], indices) in parsed
            .semantic_triples
            .iter()
            .zip(&parsed.episodic_evidence)
        {
            for &idx in indices {
                if idx >= items.len() {
                    return Err(Error::Validation(format!(
                        "evidence index {idx} out of range for {} items",
                        items.len()
                    )));
                }
            }
            let provenance = indices.iter().map(|&i| items[i].segment_id.clone());
            match Triplet::new(TripletKind::Semantic, s, p, o, provenance) {
                Ok(t) => {
                    triplets.push(t);
                    evidence.push(indices.clone());
                }
                Err(e) => log::warn!("skipping semantic triple ({s}, {p}, {o}): {e}"),
            }
        }
        Ok(SemanticBatch { triplets, evidence })
    }

    /// Pair incoming triplets with existing edges whose embedding cosine
    /// clears the threshold. Fails whole (no partial result) on any
    /// embedding error.
    pub fn match_candidates(
        &self,
        incoming: &[Triplet],
        threshold: f64,
        backends: &BackendSet,
    ) -> Result<Vec<MatchPair>> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid("match threshold must lie in (0, 1]"));
        }
        let embedder = backends.get(Role::Embedder)?;
        let existing_vecs: Vec<(TripletKey, Vec<f64>)> = self
            .graph
            .edges()
            .map(|t| Ok((t.key(), embed_unit(embedder, &t.embedding_text())?)))
            .collect::<Result<_>>()?;
        let mut pairs = Vec::new();
        for (i, t) in incoming.iter().enumerate() {
            let v = embed_unit(embedder, &t.embedding_text())?;
            for (key, existing_vec) in &existing_vecs {
                let similarity = cosine(&v, existing_vec);
                if similarity >= threshold {
                    pairs.push(MatchPair {
                        existing: key.clone(),
                        incoming_index: i,
                        similarity,
                    });
                }
            }
        }
        pairs.sort_by(|a, b| {
            a.incoming_index
                .cmp(&b.incoming_index)
                .then_with(|| a.existing.cmp(&b.existing))
        });
        Ok(pairs)
    }

    /// Consolidate one incoming batch into the next generation.
    ///
    /// Per incoming triplet the judge sees only its matched, still-live
    /// existing edges and answers with a possibly-revised triple plus
    /// removal indices into that matched list. Indices outside the list are
    /// ignored (unmatched edges are never removed); malformed judge output
    /// adds the incoming triplet unchanged. The new graph is
    /// `(prev \ removed) ∪ updated` and the journal gains one record.
    pub fn consolidate(
        &mut self,
        incoming: Vec<Triplet>,
        segment_ranges: BTreeMap<SegmentId, TimeRange>,
        config: &RetrievalConfig,
        backends: &BackendSet,
    ) -> Result<&ConsolidationRecord> {
        let match_pairs =
            self.match_candidates(&incoming, config.consolidation_threshold, backends)?;

        let mut removed_keys: BTreeSet<TripletKey> = BTreeSet::new();
        let mut updated: Vec<Triplet> = Vec::new();
        for (i, t) in incoming.iter().enumerate() {
            let matched: Vec<&TripletKey> = match_pairs
                .iter()
                .filter(|p| p.incoming_index == i && !removed_keys.contains(&p.existing))
                .map(|p| &p.existing)
                .collect();
            if matched.is_empty() {
                updated.push(t.clone());
                continue;
            }
            match self.judge(t, &matched, backends) {
                Ok(decision) => {
                    let mut merged_provenance = t.provenance.clone();
                    for &idx in &decision.remove_indices {
                        match matched.get(idx) {
                            Some(&key) => {
                                if let Some(existing) = self.graph.edge(key) {
                                    merged_provenance.extend(existing.provenance.iter().cloned());
                                }
                                removed_keys.insert(key.clone());
                            }
                            None => log::warn!(
                                "judge removal index {idx} outside matched set ({} entries); ignored",
                                matched.len()
                            ),
                        }
                    }
                    match decision.updated {
                        Some([s, p, o]) => {
                            match Triplet::new(TripletKind::Semantic, &s, &p, &o, merged_provenance)
                            {
                                Ok(revised) => updated.push(revised),
                                Err(e) => {
                                    log::warn!(
                                        "judge produced degenerate triple: {e}; keeping incoming"
                                    );
                                    updated.push(t.clone());
                                }
                            }
                        }
                        None => {
                            // Judge dropped both sides (conflict resolution).
                        }
                    }
                }
                Err(e) => {
                    log::warn!(
                        "judge output unusable for {}: {e}; adding incoming unchanged",
                        t.key()
                    );
                    updated.push(t.clone());
                }
            }
        }

        let removed: Vec<Triplet> = removed_keys
            .iter()
            .filter_map(|k| self.graph.edge(k).cloned())
            .collect();
        let record = ConsolidationRecord {
            generation: self.generation + 1,
            incoming,
            removed,
            updated,
            match_pairs,
            segment_ranges,
        };
        apply_record(&mut self.graph, &record);
        self.generation += 1;
        self.journal.push(record);
        Ok(self.journal.last().expect("just pushed"))
    }

    fn judge(
        &self,
        incoming: &Triplet,
        matched: &[&TripletKey],
        backends: &BackendSet,
    ) -> Result<JudgeOutcome> {
        let new_triple =
            serde_json::to_string(&[&incoming.subject, &incoming.predicate, &incoming.object])
                .expect("triple serializes");
        let existing_triples = matched
            .iter()
            .enumerate()
            .map(|(i, k)| {
                format!(
                    "{i}. {}",
                    serde_json::to_string(&[&k.subject, &k.predicate, &k.object]).unwrap()
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let inputs = BTreeMap::from([
            ("new_triple", new_triple),
            ("existing_triples", existing_triples),
        ]);
        let judge = backends.get(Role::Judge)?;
        let raw = complete(judge, TemplateId::ConsolidationJudge, &inputs, &[])?;
        let decision = parse_judge_decision(&raw)?;
        Ok(JudgeOutcome {
            updated: decision.updated_triple,
            remove_indices: decision.triples_to_remove,
        })
    }

    /// Edge-ranked retrieval: PPR from query-matched nodes, each edge scored
    /// by the sum of its endpoints' scores, top-k returned.
    pub fn semantic_retrieve(
        &self,
        query: &str,
        config: &RetrievalConfig,
        backends: &BackendSet,
    ) -> Result<SemanticRetrieval> {
        if self.graph.is_empty() {
            return Err(Error::invalid("semantic retrieval on an empty graph"));
        }
        let entities = query_entities(query, backends)?;
        let seeds = query_seeds(
            &self.graph,
            &entities,
            backends,
            config.node_match_threshold,
        )?;
        if seeds.is_empty() {
            log::warn!("semantic retrieval: no node matched query {query:?}");
            return Ok(SemanticRetrieval {
                triplets: Vec::new(),
                no_seed: true,
            });
        }
        let ppr = self.graph.ppr(&seeds, &config.ppr)?;
        let ranked = self.graph.edge_scores(&ppr.scores)?;
        Ok(SemanticRetrieval {
            triplets: ranked
                .into_iter()
                .take(config.semantic_k)
                .map(|(t, s)| (t.clone(), s))
                .collect(),
            no_seed: false,
        })
    }

    /// Rebuild the graph from scratch by replaying a journal.
    pub fn replay_journal(journal: &[ConsolidationRecord]) -> KnowledgeGraph {
        let mut graph = KnowledgeGraph::new(TripletKind::Semantic);
        for record in journal {
            apply_record(&mut graph, record);
        }
        graph
    }

    /// Reconstruct a memory from a stored journal (load path).
    pub fn from_journal(journal: Vec<ConsolidationRecord>) -> Result<Self> {
        for (i, record) in journal.iter().enumerate() {
            if record.generation != i as u64 + 1 {
                return Err(Error::Validation(format!(
                    "journal record {i} has generation {}, expected {}",
                    record.generation,
                    i + 1
                )));
            }
        }
        let graph = Self::replay_journal(&journal);
        Ok(SemanticMemory {
            graph,
            generation: journal.len() as u64,
            journal,
        })
    }
}

struct JudgeOutcome {
    updated: Option<[String; 3]>,
    remove_indices: Vec<usize>,
}

/// Slot inputs of a semantic-extraction dispatch: the numbered item listing
/// the evidence indices refer to. Exposed for fixture authors.
pub fn extraction_inputs(items: &[CaptionItem]) -> BTreeMap<&'static str, String> {
    let listing = items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{i}. {}", item.text))
        .collect::<Vec<_>>()
        .join("\n");
    BTreeMap::from([("episodic_items", listing)])
}

/// The Eq-3 application step shared by live consolidation and replay:
/// remove, then upsert the revised triplets, registering any new ranges.
fn apply_record(graph: &mut KnowledgeGraph, record: &ConsolidationRecord) {
    for (id, range) in &record.segment_ranges {
        graph.register_segment(id.clone(), *range);
    }
    for t in &record.removed {
        graph.remove_edge(&t.key());
    }
    let report = graph.upsert_triplets(record.updated.iter().cloned());
    for (i, err) in report.rejected {
        log::error!("consolidation updated triplet #{i} rejected: {err}");
    }
}

/// Structural Eq-3 check: `next == (prev \ removed) ∪ updated` on key sets.
pub fn consolidation_identity_holds(
    prev_keys: &BTreeSet<TripletKey>,
    record: &ConsolidationRecord,
    next_keys: &BTreeSet<TripletKey>,
) -> bool {
    let mut expected: BTreeSet<TripletKey> = prev_keys.clone();
    for t in &record.removed {
        expected.remove(&t.key());
    }
    for t in &record.updated {
        expected.insert(t.key());
    }
    &expected == next_keys
}
