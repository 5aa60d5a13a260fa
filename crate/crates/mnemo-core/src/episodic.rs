//! Multi-scale episodic memory: one knowledge graph plus segment store per
//! timescale, built bottom-up from fine captions, retrieved coarse-to-fine
//! with PPR segment scoring and a model-driven cross-scale rerank.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{
    complete, parse_named_entities, parse_ranked_ids, parse_triple_list, BackendSet, RankedId,
    Role, TemplateId,
};
use crate::config::RetrievalConfig;
use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triplet, TripletKind};
use crate::seeding::{query_entities, query_seeds};
use crate::temporal::{Segment, SegmentId, TimeRange, TimescaleConfig};

/// Graph and segment store of one timescale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStore {
    pub graph: KnowledgeGraph,
    pub segments: BTreeMap<SegmentId, Segment>,
}

impl ScaleStore {
    fn new() -> Self {
        ScaleStore {
            graph: KnowledgeGraph::new(TripletKind::Episodic),
            segments: BTreeMap::new(),
        }
    }
}

/// One retrieval candidate: a segment with its PPR-derived relevance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCandidate {
    pub segment: Segment,
    pub scale_ms: u64,
    pub relevance: f64,
}

/// Per-scale top-k retrieval output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodicRetrieval {
    pub by_scale: BTreeMap<u64, Vec<ScaleCandidate>>,
    /// Set when the whole memory was empty at retrieval time.
    pub empty_memory: bool,
}

impl EpisodicRetrieval {
    pub fn all_candidates(&self) -> Vec<&ScaleCandidate> {
        self.by_scale.values().flatten().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicMemory {
    config: TimescaleConfig,
    per_scale: BTreeMap<u64, ScaleStore>,
}

impl EpisodicMemory {
    pub fn new(config: TimescaleConfig) -> Self {
        let per_scale = config
            .scales_ms
            .iter()
            .map(|&scale| (scale, ScaleStore::new()))
            .collect();
        EpisodicMemory { config, per_scale }
    }

    pub fn config(&self) -> &TimescaleConfig {
        &self.config
    }

    /// Rebuild a memory from stored segments and triplets (the snapshot
    /// load path — no re-extraction). Invariants are re-validated: scales
    /// must be configured, ids unique, and every triplet's provenance must
    /// name a segment stored at the same scale.
    pub fn restore(
        config: TimescaleConfig,
        parts: BTreeMap<u64, (Vec<Segment>, Vec<Triplet>)>,
    ) -> Result<Self> {
        let mut mem = Self::new(config);
        for (scale_ms, (segments, triplets)) in parts {
            let store = mem.per_scale.get_mut(&scale_ms).ok_or_else(|| {
                Error::Validation(format!("stored scale {scale_ms} ms is not configured"))
            })?;
            for seg in segments {
                if seg.scale_ms != scale_ms {
                    return Err(Error::Validation(format!(
                        "segment {} has scale {} ms but is stored under {scale_ms} ms",
                        seg.id, seg.scale_ms
                    )));
                }
                store.graph.register_segment(seg.id.clone(), seg.range);
                if store.segments.insert(seg.id.clone(), seg.clone()).is_some() {
                    return Err(Error::Validation(format!(
                        "duplicate segment id {}",
                        seg.id
                    )));
                }
            }
            let report = store.graph.upsert_triplets(triplets);
            if let Some((i, err)) = report.rejected.into_iter().next() {
                return Err(Error::Validation(format!(
                    "stored triplet #{i} at scale {scale_ms} ms invalid: {err}"
                )));
            }
            for t in store.graph.edges() {
                for p in &t.provenance {
                    if !store.segments.contains_key(p) {
                        return Err(Error::Validation(format!(
                            "triplet {} references unknown segment {p} at scale {scale_ms} ms",
                            t.key()
                        )));
                    }
                }
            }
        }
        Ok(mem)
    }

    pub fn store(&self, scale_ms: u64) -> Option<&ScaleStore> {
        self.per_scale.get(&scale_ms)
    }

    pub fn stores(&self) -> impl Iterator<Item = (u64, &ScaleStore)> {
        self.per_scale.iter().map(|(&s, store)| (s, store))
    }

    pub fn segment_count(&self) -> usize {
        self.per_scale.values().map(|s| s.segments.len()).sum()
    }

    pub fn triplet_count(&self) -> usize {
        self.per_scale.values().map(|s| s.graph.edge_count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_scale.values().all(|s| s.segments.is_empty())
    }

    /// Ingest a fine-scale captioned segment: entities and triplets are
    /// extracted from the caption and land in the fine graph with this
    /// segment as provenance. On any failure the memory is unchanged.
    pub fn ingest_fine_segment(&mut self, seg: Segment, backends: &BackendSet) -> Result<()> {
        if seg.scale_ms != self.config.fine_scale_ms() {
            return Err(Error::invalid(format!(
                "segment {} has scale {} ms, fine scale is {} ms",
                seg.id,
                seg.scale_ms,
                self.config.fine_scale_ms()
            )));
        }
        self.ingest_captioned_segment(seg, backends)
    }

    /// Ingest a pre-captioned segment at any configured scale (the record
    /// path for streams that already carry coarse captions).
    pub fn ingest_captioned_segment(&mut self, seg: Segment, backends: &BackendSet) -> Result<()> {
        if !self.per_scale.contains_key(&seg.scale_ms) {
            return Err(Error::invalid(format!(
                "scale {} ms is not configured",
                seg.scale_ms
            )));
        }
        if seg.caption.trim().is_empty() {
            return Err(Error::invalid(format!(
                "segment {} has an empty caption",
                seg.id
            )));
        }
        if self.per_scale[&seg.scale_ms].segments.contains_key(&seg.id) {
            return Err(Error::Validation(format!(
                "segment id {} already stored at scale {} ms",
                seg.id, seg.scale_ms
            )));
        }
        // Extract everything before touching state so failures leave the
        // memory unchanged.
        let triplets = extract_triplets(&seg, backends).map_err(|e| Error::Ingest {
            segment_id: seg.id.to_string(),
            source: Box::new(e),
        })?;
        let store = self
            .per_scale
            .get_mut(&seg.scale_ms)
            .expect("scale checked");
        store.graph.register_segment(seg.id.clone(), seg.range);
        let report = store.graph.upsert_triplets(triplets);
        for (i, err) in report.rejected {
            log::warn!("segment {}: dropped extracted triplet #{i}: {err}", seg.id);
        }
        store.segments.insert(seg.id.clone(), seg);
        Ok(())
    }

    /// Build one coarse segment over `range` by summarizing the captions of
    /// the immediately finer scale, then extract and store like any other
    /// segment. The finer captions must already cover the range exactly.
    pub fn ingest_coarse_segment(
        &mut self,
        scale_ms: u64,
        range: TimeRange,
        backends: &BackendSet,
    ) -> Result<SegmentId> {
        let finer = self.config.finer_scale(scale_ms).ok_or_else(|| {
            Error::invalid(format!(
                "scale {scale_ms} ms is not a configured coarse scale"
            ))
        })?;
        let constituents = self.covering_segments(finer, range)?;
        let listing = caption_listing(constituents.iter().copied());

        let summarizer = backends.get(Role::Summarizer)?;
        let summary = complete(
            summarizer,
            TemplateId::CoarseSummary,
            &summary_inputs(listing),
            &[],
        )?;

        let id = format!("e{scale_ms}_{}", range.start_ms);
        let seg = Segment::new(id.clone(), range, scale_ms, summary, None)?;
        self.ingest_captioned_segment(seg, backends)?;
        Ok(SegmentId::new(id))
    }

    /// The finer-scale segments tiling `range`, in time order; gaps are a
    /// dependency error naming the missing stretches.
    fn covering_segments(&self, finer_scale: u64, range: TimeRange) -> Result<Vec<&Segment>> {
        let store = self
            .per_scale
            .get(&finer_scale)
            .ok_or_else(|| Error::invalid(format!("scale {finer_scale} ms is not configured")))?;
        let mut covering: Vec<&Segment> = store
            .segments
            .values()
            .filter(|s| s.range.overlaps(&range))
            .collect();
        covering.sort_by_key(|s| s.range.start_ms);

        let mut gaps = Vec::new();
        let mut cursor = range.start_ms;
        for seg in &covering {
            if seg.range.start_ms > cursor {
                gaps.push(TimeRange {
                    start_ms: cursor,
                    end_ms: seg.range.start_ms,
                });
            }
            cursor = cursor.max(seg.range.end_ms);
        }
        if cursor < range.end_ms {
            gaps.push(TimeRange {
                start_ms: cursor,
                end_ms: range.end_ms,
            });
        }
        if !gaps.is_empty() {
            return Err(Error::DependencyGap {
                scale_ms: finer_scale,
                gaps,
            });
        }
        Ok(covering)
    }

    /// Coarse-to-fine retrieval: per scale, seed PPR from query-matched
    /// nodes and score each segment by the PPR mass of its incident
    /// entities. A scale with no matched seed returns empty, which is not
    /// an error.
    pub fn episodic_retrieve(
        &self,
        query: &str,
        config: &RetrievalConfig,
        backends: &BackendSet,
    ) -> Result<EpisodicRetrieval> {
        let mut result = EpisodicRetrieval {
            by_scale: BTreeMap::new(),
            empty_memory: self.is_empty(),
        };
        if result.empty_memory {
            log::warn!("episodic retrieval on empty memory");
            return Ok(result);
        }
        let entities = query_entities(query, backends)?;
        for (&scale_ms, store) in &self.per_scale {
            let candidates =
                self.retrieve_at_scale(store, scale_ms, &entities, config, backends)?;
            result.by_scale.insert(scale_ms, candidates);
        }
        Ok(result)
    }

    fn retrieve_at_scale(
        &self,
        store: &ScaleStore,
        scale_ms: u64,
        entities: &[String],
        config: &RetrievalConfig,
        backends: &BackendSet,
    ) -> Result<Vec<ScaleCandidate>> {
        if store.segments.is_empty() || store.graph.node_count() == 0 {
            return Ok(Vec::new());
        }
        let seeds = query_seeds(
            &store.graph,
            entities,
            backends,
            config.node_match_threshold,
        )?;
        if seeds.is_empty() {
            return Ok(Vec::new());
        }
        let ppr = store.graph.ppr(&seeds, &config.ppr)?;

        // Segment relevance: sum of PPR mass over entities incident to it.
        let mut segment_scores: BTreeMap<&SegmentId, f64> = BTreeMap::new();
        for (node, score) in &ppr.scores {
            if let Some(segments) = store.graph.node_segments(node) {
                for seg_id in segments {
                    *segment_scores.entry(seg_id).or_insert(0.0) += score;
                }
            }
        }
        let mut ranked: Vec<(&SegmentId, f64)> = segment_scores.into_iter().collect();
        ranked.sort_by(|(ida, sa), (idb, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    let ra = store.segments[*ida].range.start_ms;
                    let rb = store.segments[*idb].range.start_ms;
                    ra.cmp(&rb)
                })
                .then_with(|| ida.cmp(idb))
        });
        Ok(ranked
            .into_iter()
            .take(config.k_per_scale)
            .map(|(id, relevance)| ScaleCandidate {
                segment: store.segments[id].clone(),
                scale_ms,
                relevance,
            })
            .collect())
    }
}

/// Slot inputs of an entity-extraction dispatch; exposed so fixture authors
/// key scripted responses exactly the way the engine dispatches them.
pub fn ner_inputs(paragraph: &str) -> BTreeMap<&'static str, String> {
    BTreeMap::from([("paragraph", paragraph.to_string())])
}

/// Slot inputs of a triple-extraction dispatch.
pub fn triple_inputs(paragraph: &str, entities: &[String]) -> BTreeMap<&'static str, String> {
    let entities_json = serde_json::to_string(entities).expect("entity list serializes");
    BTreeMap::from([
        ("paragraph", paragraph.to_string()),
        ("named_entities", entities_json),
    ])
}

/// The caption listing a coarse summarization dispatch sees.
pub fn caption_listing<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> String {
    segments
        .into_iter()
        .map(|s| format!("[{}] {}", s.range.format_clock(), s.caption))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Slot inputs of a coarse summarization dispatch.
pub fn summary_inputs(caption_listing: String) -> BTreeMap<&'static str, String> {
    BTreeMap::from([("captions", caption_listing)])
}

fn extract_triplets(seg: &Segment, backends: &BackendSet) -> Result<Vec<Triplet>> {
    let extractor = backends.get(Role::Extractor)?;
    let mut paragraph = seg.caption.clone();
    if let Some(transcript) = &seg.transcript {
        paragraph.push_str("\nTranscript: ");
        paragraph.push_str(transcript);
    }

    let raw_entities = complete(extractor, TemplateId::Ner, &ner_inputs(&paragraph), &[])?;
    let entities = parse_named_entities(&raw_entities)?;

    let raw_triples = complete(
        extractor,
        TemplateId::TripleExtraction,
        &triple_inputs(&paragraph, &entities),
        &[],
    )?;
    let rows = parse_triple_list(&raw_triples)?;

    let mut triplets = Vec::with_capacity(rows.len());
    for (s, p, o) in rows {
        match Triplet::new(TripletKind::Episodic, &s, &p, &o, [seg.id.clone()]) {
            Ok(t) => triplets.push(t),
            Err(e) => log::warn!("segment {}: skipping triple ({s}, {p}, {o}): {e}", seg.id),
        }
    }
    Ok(triplets)
}

/// Pool candidates from all scales and let the reranker pick the final
/// top-m. The backend sees ids, time ranges, scales, and captions, and must
/// return a ranked id array; unknown ids are dropped, and a reply with no
/// valid ids falls back to global relevance order.
pub fn cross_scale_rerank(
    query: &str,
    candidates: &[ScaleCandidate],
    m: usize,
    backends: &BackendSet,
) -> Result<Vec<Segment>> {
    if candidates.len() <= 1 {
        return Ok(candidates
            .iter()
            .take(m)
            .map(|c| c.segment.clone())
            .collect());
    }

    let listing = candidates
        .iter()
        .map(|c| {
            format!(
                "ID: {} | {} | scale {} ms\n{}",
                c.segment.id,
                c.segment.range.format_clock(),
                c.scale_ms,
                c.segment.caption
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    let inputs = BTreeMap::from([("question", query.to_string()), ("candidates", listing)]);
    let reranker = backends.get(Role::Reranker)?;
    let raw = complete(reranker, TemplateId::Rerank, &inputs, &[])?;

    let by_id: BTreeMap<&str, &ScaleCandidate> = candidates
        .iter()
        .map(|c| (c.segment.id.as_str(), c))
        .collect();
    let mut picked: Vec<Segment> = Vec::new();
    let push = |c: &ScaleCandidate, picked: &mut Vec<Segment>| {
        if !picked.iter().any(|s| s.id == c.segment.id) {
            picked.push(c.segment.clone());
        }
    };
    match parse_ranked_ids(&raw) {
        Ok(ids) => {
            for id in ids {
                match id {
                    RankedId::Name(name) => match by_id.get(name.as_str()) {
                        Some(c) => push(c, &mut picked),
                        None => log::warn!("reranker returned unknown id {name:?}; dropped"),
                    },
                    RankedId::Index(i) => match candidates.get(i) {
                        Some(c) => push(c, &mut picked),
                        None => log::warn!("reranker returned out-of-range index {i}; dropped"),
                    },
                }
            }
        }
        Err(e) => log::warn!("reranker output unusable ({e}); falling back to score order"),
    }
    if picked.is_empty() {
        let mut by_score: Vec<&ScaleCandidate> = candidates.iter().collect();
        by_score.sort_by(|a, b| {
            b.relevance
                .partial_cmp(&a.relevance)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.segment.range.start_ms.cmp(&b.segment.range.start_ms))
                .then_with(|| a.segment.id.cmp(&b.segment.id))
        });
        picked = by_score.into_iter().map(|c| c.segment.clone()).collect();
    }
    picked.truncate(m);
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use std::sync::Arc;

    fn fine_segment(id: &str, start: u64, caption: &str) -> Segment {
        Segment::new(
            id,
            TimeRange::new(start, start + 30_000).unwrap(),
            30_000,
            caption,
            None,
        )
        .unwrap()
    }

    fn config_2scale() -> TimescaleConfig {
        TimescaleConfig::new(vec![30_000, 60_000], 600_000, 30_000).unwrap()
    }

    /// Register NER + triple-extraction fixtures for a caption, mirroring
    /// the exact inputs the ingest pipeline renders.
    fn script_extraction(
        backend: &mut ScriptedBackend,
        paragraph: &str,
        entities: &[&str],
        triples: &[(&str, &str, &str)],
    ) {
        let ner_inputs = BTreeMap::from([("paragraph", paragraph.to_string())]);
        let entities_json = serde_json::to_string(entities).unwrap();
        backend.insert_chat(
            TemplateId::Ner,
            &ner_inputs,
            &[],
            format!("{{\"named_entities\": {entities_json}}}"),
        );
        let triple_inputs = BTreeMap::from([
            ("paragraph", paragraph.to_string()),
            ("named_entities", entities_json.clone()),
        ]);
        let rows: Vec<[&str; 3]> = triples.iter().map(|&(s, p, o)| [s, p, o]).collect();
        backend.insert_chat(
            TemplateId::TripleExtraction,
            &triple_inputs,
            &[],
            format!("{{\"triples\": {}}}", serde_json::to_string(&rows).unwrap()),
        );
    }

    #[test]
    fn ingest_extracts_and_stores() {
        let caption = "Radio City is India's first private FM radio station.";
        let mut scripted = ScriptedBackend::new();
        script_extraction(
            &mut scripted,
            caption,
            &["Radio City", "India"],
            &[
                ("Radio City", "located in", "India"),
                ("Radio City", "is", "private FM radio station"),
            ],
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        mem.ingest_fine_segment(fine_segment("s1", 0, caption), &backends)
            .unwrap();

        let store = mem.store(30_000).unwrap();
        assert_eq!(store.segments.len(), 1);
        let keys: Vec<String> = store.graph.edges().map(|t| t.key().to_string()).collect();
        assert!(keys.contains(&"[radio city, located in, india]".to_string()));
    }

    #[test]
    fn ingest_large_extraction_counts_distinct_endpoints() {
        // A long multi-speaker scene caption whose extraction yields 18
        // triplets; the node count must equal the number of distinct
        // normalized endpoints, counted here by an independent fold.
        let caption = "A planning chat around the dining table about tomorrow's game, \
                       with everyone moving about the house.";
        let triples: [(&str, &str, &str); 18] = [
            ("I", "stand at", "dining table"),
            ("I", "walk to", "other side of the dining table"),
            ("Katrina", "asks about", "tomorrow"),
            ("I", "confirm", "tomorrow"),
            ("I", "raise", "right hand"),
            ("Katrina", "walks toward", "I"),
            ("Lucia", "asks about", "using ancient poems"),
            ("Katrina", "says", "not good with ancient poems"),
            ("Tasha", "asks", "what else to use"),
            ("Katrina", "says", "I will be out in the first round"),
            ("Katrina", "has", "room already cleaned up"),
            ("I", "turn toward", "stairs"),
            ("I", "put down", "phone"),
            ("I", "look back at", "living room door"),
            ("I", "walk into", "second-floor living room"),
            ("Lucia", "adds", "not coming out as an example"),
            ("Katrina", "says", "let me check that place we're going to"),
            ("Lucia", "says", "Okay"),
        ];
        let mut scripted = ScriptedBackend::new();
        script_extraction(
            &mut scripted,
            caption,
            &["I", "Katrina", "Lucia", "Tasha"],
            &triples,
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        mem.ingest_fine_segment(fine_segment("s1", 0, caption), &backends)
            .unwrap();

        let graph = &mem.store(30_000).unwrap().graph;
        assert_eq!(graph.edge_count(), 18);
        // Independent endpoint count over the normalized triple list.
        let expected_nodes: std::collections::BTreeSet<String> = triples
            .iter()
            .flat_map(|&(s, _, o)| [s, o])
            .map(|e| crate::graph::normalize_entity(e).unwrap())
            .collect();
        assert_eq!(graph.node_count(), expected_nodes.len());
        for expected in ["i", "katrina", "lucia", "tasha"] {
            assert!(graph.has_node(expected));
        }
        assert!(graph
            .edges()
            .any(|t| t.key().to_string() == "[katrina, walks toward, i]"));
    }

    #[test]
    fn coarse_echo_summary_reextracts_constituent_triples() {
        // With a summarizer that echoes the concatenated fine captions, the
        // coarse graph's edge set equals the union of the fine extractions,
        // re-provenanced to the coarse segment.
        let captions = [
            ("f1", 0u64, "Bob opens the door."),
            ("f2", 30_000, "Alice waves back."),
        ];
        let fine_triples: [&[(&str, &str, &str)]; 2] =
            [&[("Bob", "opens", "door")], &[("Alice", "waves at", "Bob")]];
        let mut scripted = ScriptedBackend::new();
        for ((_, _, caption), triples) in captions.iter().zip(fine_triples) {
            let entities: Vec<&str> = triples.iter().flat_map(|&(s, _, o)| [s, o]).collect();
            script_extraction(&mut scripted, caption, &entities, triples);
        }
        let echo = captions
            .iter()
            .map(|(_, start, caption)| {
                format!(
                    "[{}] {caption}",
                    TimeRange::new(*start, start + 30_000)
                        .unwrap()
                        .format_clock()
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        scripted.insert_chat(
            TemplateId::CoarseSummary,
            &BTreeMap::from([("captions", echo.clone())]),
            &[],
            echo.clone(),
        );
        let union: Vec<(&str, &str, &str)> = fine_triples.concat();
        let entities: Vec<&str> = union.iter().flat_map(|&(s, _, o)| [s, o]).collect();
        script_extraction(&mut scripted, &echo, &entities, &union);

        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        for (id, start, caption) in captions {
            mem.ingest_fine_segment(fine_segment(id, start, caption), &backends)
                .unwrap();
        }
        let coarse_id = mem
            .ingest_coarse_segment(60_000, TimeRange::new(0, 60_000).unwrap(), &backends)
            .unwrap();

        let fine_keys: std::collections::BTreeSet<String> = mem
            .store(30_000)
            .unwrap()
            .graph
            .edges()
            .map(|t| t.key().to_string())
            .collect();
        let coarse = &mem.store(60_000).unwrap().graph;
        let coarse_keys: std::collections::BTreeSet<String> =
            coarse.edges().map(|t| t.key().to_string()).collect();
        assert_eq!(coarse_keys, fine_keys);
        assert!(coarse
            .edges()
            .all(|t| t.provenance.iter().all(|p| p == &coarse_id)));
    }

    #[test]
    fn ingest_rejects_empty_caption_unchanged() {
        let backends = BackendSet::uniform(Arc::new(ScriptedBackend::new()));
        let mut mem = EpisodicMemory::new(config_2scale());
        let seg = fine_segment("s1", 0, "   ");
        assert!(mem.ingest_fine_segment(seg, &backends).is_err());
        assert!(mem.is_empty());
    }

    #[test]
    fn ingest_backend_failure_leaves_memory_unchanged() {
        // No fixtures registered: the scripted backend fails loudly.
        let backends = BackendSet::uniform(Arc::new(ScriptedBackend::new()));
        let mut mem = EpisodicMemory::new(config_2scale());
        let err = mem
            .ingest_fine_segment(fine_segment("s1", 0, "something"), &backends)
            .unwrap_err();
        assert!(matches!(err, Error::Ingest { .. }));
        assert!(mem.is_empty());
    }

    #[test]
    fn ingest_rejects_duplicate_ids() {
        let caption = "Alice waves.";
        let mut scripted = ScriptedBackend::new();
        script_extraction(
            &mut scripted,
            caption,
            &["Alice"],
            &[("Alice", "waves at", "Bob")],
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        mem.ingest_fine_segment(fine_segment("s1", 0, caption), &backends)
            .unwrap();
        let dup = fine_segment("s1", 30_000, caption);
        assert!(matches!(
            mem.ingest_fine_segment(dup, &backends),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn ingest_wrong_scale_rejected() {
        let backends = BackendSet::uniform(Arc::new(ScriptedBackend::new()));
        let mut mem = EpisodicMemory::new(config_2scale());
        let seg =
            Segment::new("c1", TimeRange::new(0, 60_000).unwrap(), 60_000, "x", None).unwrap();
        assert!(mem.ingest_fine_segment(seg, &backends).is_err());
    }

    #[test]
    fn coarse_ingest_over_one_fine_segment() {
        let caption = "Bob opens the door.";
        let mut scripted = ScriptedBackend::new();
        script_extraction(
            &mut scripted,
            caption,
            &["Bob"],
            &[("Bob", "opens", "door")],
        );

        // Coarse summary over the single fine caption, then its extraction.
        let captions_rendered = format!(
            "[{}] {caption}",
            TimeRange::new(0, 30_000).unwrap().format_clock()
        );
        let summary = "Bob opened the door.";
        scripted.insert_chat(
            TemplateId::CoarseSummary,
            &BTreeMap::from([("captions", captions_rendered)]),
            &[],
            summary,
        );
        script_extraction(
            &mut scripted,
            summary,
            &["Bob"],
            &[("Bob", "opened", "door")],
        );

        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        mem.ingest_fine_segment(fine_segment("f1", 0, caption), &backends)
            .unwrap();
        let id = mem
            .ingest_coarse_segment(60_000, TimeRange::new(0, 30_000).unwrap(), &backends)
            .unwrap();

        let store = mem.store(60_000).unwrap();
        let seg = &store.segments[&id];
        assert_eq!(seg.caption, summary);
        assert!(store.graph.edge_count() >= 1);
        let t = store.graph.edges().next().unwrap();
        assert_eq!(t.provenance.iter().next().unwrap(), &id);
    }

    #[test]
    fn coarse_ingest_reports_gaps() {
        let caption = "Bob opens the door.";
        let mut scripted = ScriptedBackend::new();
        script_extraction(
            &mut scripted,
            caption,
            &["Bob"],
            &[("Bob", "opens", "door")],
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let mut mem = EpisodicMemory::new(config_2scale());
        mem.ingest_fine_segment(fine_segment("f1", 0, caption), &backends)
            .unwrap();

        let err = mem
            .ingest_coarse_segment(60_000, TimeRange::new(0, 60_000).unwrap(), &backends)
            .unwrap_err();
        match err {
            Error::DependencyGap { scale_ms, gaps } => {
                assert_eq!(scale_ms, 30_000);
                assert_eq!(gaps, vec![TimeRange::new(30_000, 60_000).unwrap()]);
            }
            other => panic!("expected dependency gap, got {other}"),
        }
    }

    #[test]
    fn unique_evidence_ranks_first() {
        let mut scripted = ScriptedBackend::new();
        let captions = [
            ("s0", "Alice reads a book."),
            ("s1", "Bob plays the guitar."),
            ("s2", "Carol cooks dinner."),
        ];
        script_extraction(
            &mut scripted,
            captions[0].1,
            &["Alice"],
            &[("Alice", "reads", "book")],
        );
        script_extraction(
            &mut scripted,
            captions[1].1,
            &["Bob"],
            &[("Bob", "plays", "guitar")],
        );
        script_extraction(
            &mut scripted,
            captions[2].1,
            &["Carol"],
            &[("Carol", "cooks", "dinner")],
        );
        // Query NER: "guitar" names the unique node.
        scripted.insert_chat(
            TemplateId::Ner,
            &BTreeMap::from([("paragraph", "who plays guitar".to_string())]),
            &[],
            r#"{"named_entities": ["guitar"]}"#,
        );
        let backends = BackendSet::uniform(Arc::new(scripted));

        let mut mem = EpisodicMemory::new(config_2scale());
        for (i, (id, caption)) in captions.iter().enumerate() {
            mem.ingest_fine_segment(fine_segment(id, i as u64 * 30_000, caption), &backends)
                .unwrap();
        }
        let result = mem
            .episodic_retrieve("who plays guitar", &RetrievalConfig::default(), &backends)
            .unwrap();
        let fine = &result.by_scale[&30_000];
        assert_eq!(fine[0].segment.id.as_str(), "s1");
        assert!(fine[0].relevance > 0.0);
    }

    #[test]
    fn retrieve_on_empty_memory_warns() {
        let backends = BackendSet::uniform(Arc::new(ScriptedBackend::new()));
        let mem = EpisodicMemory::new(config_2scale());
        let result = mem
            .episodic_retrieve("anything", &RetrievalConfig::default(), &backends)
            .unwrap();
        assert!(result.empty_memory);
        assert!(result.by_scale.is_empty());
    }

    #[test]
    fn rerank_single_candidate_skips_backend() {
        let backends = BackendSet::uniform(Arc::new(ScriptedBackend::new()));
        let candidate = ScaleCandidate {
            segment: fine_segment("s1", 0, "only one"),
            scale_ms: 30_000,
            relevance: 1.0,
        };
        let out = cross_scale_rerank("q", &[candidate], 3, &backends).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id.as_str(), "s1");
    }

    #[test]
    fn rerank_follows_backend_order_and_drops_unknown() {
        let candidates: Vec<ScaleCandidate> = (0..3)
            .map(|i| ScaleCandidate {
                segment: fine_segment(&format!("s{i}"), i * 30_000, "c"),
                scale_ms: 30_000,
                relevance: 1.0 - i as f64 * 0.1,
            })
            .collect();
        let listing = candidates
            .iter()
            .map(|c| {
                format!(
                    "ID: {} | {} | scale {} ms\n{}",
                    c.segment.id,
                    c.segment.range.format_clock(),
                    c.scale_ms,
                    c.segment.caption
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n");
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::Rerank,
            &BTreeMap::from([("question", "q".to_string()), ("candidates", listing)]),
            &[],
            r#"["s2", "ghost", "s0"]"#,
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let out = cross_scale_rerank("q", &candidates, 2, &backends).unwrap();
        let ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["s2", "s0"]);
    }

    #[test]
    fn rerank_falls_back_to_score_order_on_garbage() {
        let candidates: Vec<ScaleCandidate> = (0..3)
            .map(|i| ScaleCandidate {
                segment: fine_segment(&format!("s{i}"), i * 30_000, "c"),
                scale_ms: 30_000,
                relevance: [0.2, 0.9, 0.5][i as usize],
            })
            .collect();
        let listing = candidates
            .iter()
            .map(|c| {
                format!(
                    "ID: {} | {} | scale {} ms\n{}",
                    c.segment.id,
                    c.segment.range.format_clock(),
                    c.scale_ms,
                    c.segment.caption
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n");
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::Rerank,
            &BTreeMap::from([("question", "q".to_string()), ("candidates", listing)]),
            &[],
            "none of these look relevant",
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let out = cross_scale_rerank("q", &candidates, 2, &backends).unwrap();
        let ids: Vec<&str> = out.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["s1", "s2"]);
    }
}
