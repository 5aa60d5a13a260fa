//! Query-to-node seeding shared by episodic and semantic retrieval: extract
//! entities from the query, match them to graph nodes (exact first, then
//! embedding similarity above the node-match threshold), and spread uniform
//! seed mass over the matches.

use std::collections::BTreeMap;

use crate::backend::{
    complete, cosine, embed_unit, parse_named_entities, BackendSet, Role, TemplateId,
};
use crate::error::Result;
use crate::graph::{normalize_entity, KnowledgeGraph};

/// Entities mentioned by a query, normalized and deduplicated. Falls back to
/// the whole query string when entity extraction returns nothing usable.
pub fn query_entities(query: &str, backends: &BackendSet) -> Result<Vec<String>> {
    let extractor = backends.get(Role::Extractor)?;
    let inputs = BTreeMap::from([("paragraph", query.to_string())]);
    let raw = complete(extractor, TemplateId::Ner, &inputs, &[])?;
    let mut out = Vec::new();
    for surface in parse_named_entities(&raw)? {
        if let Ok(normalized) = normalize_entity(&surface) {
            if !out.contains(&normalized) {
                out.push(normalized);
            }
        }
    }
    if out.is_empty() {
        if let Ok(whole) = normalize_entity(query) {
            out.push(whole);
        }
    }
    Ok(out)
}

/// Match one entity to a node: exact canonical match wins; otherwise the
/// best node by embedding cosine, if it clears the threshold.
fn match_node(
    graph: &KnowledgeGraph,
    entity: &str,
    backends: &BackendSet,
    threshold: f64,
) -> Result<Option<String>> {
    if graph.has_node(entity) {
        return Ok(Some(entity.to_string()));
    }
    let embedder = backends.get(Role::Embedder)?;
    let query_vec = embed_unit(embedder, entity)?;
    let mut best: Option<(f64, &str)> = None;
    for node in graph.nodes() {
        let node_vec = embed_unit(embedder, node)?;
        let sim = cosine(&query_vec, &node_vec);
        if sim >= threshold && best.is_none_or(|(b, _)| sim > b) {
            best = Some((sim, node));
        }
    }
    Ok(best.map(|(_, node)| node.to_string()))
}

/// Seed weights for PPR: uniform over matched query entities; entities that
/// match nothing contribute no mass. Empty map means no seed matched.
pub fn query_seeds(
    graph: &KnowledgeGraph,
    entities: &[String],
    backends: &BackendSet,
    threshold: f64,
) -> Result<BTreeMap<String, f64>> {
    let mut matched: Vec<String> = Vec::new();
    for entity in entities {
        if let Some(node) = match_node(graph, entity, backends, threshold)? {
            matched.push(node);
        }
    }
    if matched.is_empty() {
        return Ok(BTreeMap::new());
    }
    let share = 1.0 / matched.len() as f64;
    let mut seeds = BTreeMap::new();
    for node in matched {
        *seeds.entry(node).or_insert(0.0) += share;
    }
    Ok(seeds)
}
