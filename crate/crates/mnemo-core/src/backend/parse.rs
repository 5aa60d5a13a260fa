//! Tolerant extraction of structured payloads from raw model output.
//!
//! Models wrap JSON in prose or code fences; we locate the first well-formed
//! JSON value in the text and validate it against the expected schema.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Find the first well-formed JSON value embedded in `raw`.
pub fn first_json_value(raw: &str) -> Result<Value> {
    for (pos, ch) in raw.char_indices() {
        if ch != '{' && ch != '[' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&raw[pos..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            return Ok(value);
        }
    }
    Err(Error::parse("no JSON value found in output", raw))
}

fn as_string_array(value: &Value) -> Option<Vec<String>> {
    value.as_array().map(|items| {
        items
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect()
    })
}

/// Parse the NER response: `{"named_entities": [...]}` or a bare JSON list.
pub fn parse_named_entities(raw: &str) -> Result<Vec<String>> {
    let value = first_json_value(raw)?;
    let list = value
        .get("named_entities")
        .and_then(as_string_array)
        .or_else(|| as_string_array(&value))
        .ok_or_else(|| Error::parse("expected a named_entities list", raw))?;
    Ok(list)
}

fn triple_from(value: &Value) -> Option<(String, String, String)> {
    let arr = value.as_array()?;
    if arr.len() != 3 {
        return None;
    }
    let field = |v: &Value| match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    Some((field(&arr[0]), field(&arr[1]), field(&arr[2])))
}

/// Parse the RDF-extraction response: `{"triples": [[s,p,o], ...]}` or a
/// bare list of 3-element arrays. Malformed rows are skipped with a log.
pub fn parse_triple_list(raw: &str) -> Result<Vec<(String, String, String)>> {
    let value = first_json_value(raw)?;
    let rows = value
        .get("triples")
        .and_then(Value::as_array)
        .or_else(|| value.as_array())
        .ok_or_else(|| Error::parse("expected a triples list", raw))?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        match triple_from(row) {
            Some(t) => out.push(t),
            None => log::warn!("skipping malformed triple row: {row}"),
        }
    }
    Ok(out)
}

/// One reranker id: the caption id string, or a bare index into the
/// candidate list as shown in the prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankedId {
    Name(String),
    Index(usize),
}

/// Parse the reranker response: a JSON array of caption ids.
pub fn parse_ranked_ids(raw: &str) -> Result<Vec<RankedId>> {
    let value = first_json_value(raw)?;
    let arr = value
        .as_array()
        .ok_or_else(|| Error::parse("expected a JSON array of caption ids", raw))?;
    let mut out = Vec::with_capacity(arr.len());
    for v in arr {
        match v {
            Value::String(s) => out.push(RankedId::Name(s.clone())),
            Value::Number(n) => {
                let idx = n.as_u64().ok_or_else(|| {
                    Error::parse("caption index must be a non-negative integer", raw)
                })?;
                out.push(RankedId::Index(idx as usize));
            }
            other => return Err(Error::parse(format!("unexpected id value {other}"), raw)),
        }
    }
    Ok(out)
}

/// Aligned semantic-extraction payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticExtraction {
    pub semantic_triples: Vec<[String; 3]>,
    pub episodic_evidence: Vec<Vec<usize>>,
}

/// Parse the semantic-extraction response. The two lists must have the same
/// length; misalignment is a validation error, not something to repair.
pub fn parse_semantic_extraction(raw: &str) -> Result<SemanticExtraction> {
    let value = first_json_value(raw)?;
    let parsed: SemanticExtraction = serde_json::from_value(value)
        .map_err(|e| Error::parse(format!("semantic extraction shape: {e}"), raw))?;
    if parsed.semantic_triples.len() != parsed.episodic_evidence.len() {
        return Err(Error::Validation(format!(
            "semantic_triples ({}) and episodic_evidence ({}) lengths differ",
            parsed.semantic_triples.len(),
            parsed.episodic_evidence.len()
        )));
    }
    Ok(parsed)
}

/// The consolidation judge's verdict for one incoming triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeDecision {
    /// Revised form of the incoming triplet; `None` when the judge dropped
    /// both sides (empty `updated_triple` list).
    pub updated_triple: Option<[String; 3]>,
    pub triples_to_remove: Vec<usize>,
}

pub fn parse_judge_decision(raw: &str) -> Result<JudgeDecision> {
    #[derive(Deserialize)]
    struct Wire {
        updated_triple: Vec<String>,
        #[serde(default)]
        triples_to_remove: Vec<usize>,
    }
    let value = first_json_value(raw)?;
    let wire: Wire = serde_json::from_value(value)
        .map_err(|e| Error::parse(format!("judge decision shape: {e}"), raw))?;
    let updated_triple = match wire.updated_triple.len() {
        0 => None,
        3 => {
            let mut it = wire.updated_triple.into_iter();
            Some([it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
        }
        n => {
            return Err(Error::parse(
                format!("updated_triple must have 0 or 3 elements, got {n}"),
                raw,
            ))
        }
    };
    Ok(JudgeDecision {
        updated_triple,
        triples_to_remove: wire.triples_to_remove,
    })
}

/// The retrieval agent's decision object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum AgentDecision {
    Search {
        selected_memory: SelectedMemory,
    },
    Answer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        selected_memory: Option<SelectedMemory>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedMemory {
    pub memory_type: String,
    pub search_query: String,
}

pub fn parse_agent_decision(raw: &str) -> Result<AgentDecision> {
    let value = first_json_value(raw)?;
    let decision: AgentDecision = serde_json::from_value(value)
        .map_err(|e| Error::parse(format!("decision shape: {e}"), raw))?;
    if let AgentDecision::Search { selected_memory } = &decision {
        if selected_memory.search_query.trim().is_empty() {
            return Err(Error::parse("search decision with empty query", raw));
        }
    }
    Ok(decision)
}

/// Extract the first standalone answer letter that belongs to the choice
/// set. Letters embedded in words ("Answer") do not count.
pub fn parse_answer_letter(raw: &str, choices: &BTreeSet<char>) -> Option<char> {
    let chars: Vec<char> = raw.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let upper = c.to_ascii_uppercase();
        if !choices.contains(&upper) {
            continue;
        }
        let prev_word = i > 0 && chars[i - 1].is_alphanumeric();
        let next_word = i + 1 < chars.len() && chars[i + 1].is_alphanumeric();
        if !prev_word && !next_word {
            return Some(upper);
        }
    }
    None
}
