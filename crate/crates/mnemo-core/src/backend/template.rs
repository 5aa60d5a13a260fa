//! Prompt templates as data. The template texts live under `assets/prompts/`
//! so a prompt revision needs no code change; slots use `{{name}}` markers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Ner,
    TripleExtraction,
    CoarseSummary,
    Rerank,
    SemanticExtraction,
    ConsolidationJudge,
    RetrievalDecision,
    Response,
    FrameDescription,
}

impl TemplateId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::Ner => "ner",
            TemplateId::TripleExtraction => "triple_extraction",
            TemplateId::CoarseSummary => "coarse_summary",
            TemplateId::Rerank => "rerank",
            TemplateId::SemanticExtraction => "semantic_extraction",
            TemplateId::ConsolidationJudge => "consolidation_judge",
            TemplateId::RetrievalDecision => "retrieval_decision",
            TemplateId::Response => "response",
            TemplateId::FrameDescription => "frame_description",
        }
    }

    pub fn all() -> &'static [TemplateId] {
        &[
            TemplateId::Ner,
            TemplateId::TripleExtraction,
            TemplateId::CoarseSummary,
            TemplateId::Rerank,
            TemplateId::SemanticExtraction,
            TemplateId::ConsolidationJudge,
            TemplateId::RetrievalDecision,
            TemplateId::Response,
            TemplateId::FrameDescription,
        ]
    }
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What shape of response a template expects back from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseSchema {
    FreeText,
    NamedEntities,
    TripleList,
    RankedIds,
    SemanticExtraction,
    JudgeDecision,
    AgentDecision,
    AnswerLetter,
}

pub struct PromptTemplate {
    pub id: TemplateId,
    pub text: &'static str,
    pub slots: &'static [&'static str],
    pub schema: ResponseSchema,
}

pub fn template(id: TemplateId) -> &'static PromptTemplate {
    match id {
        TemplateId::Ner => &PromptTemplate {
            id: TemplateId::Ner,
            text: include_str!("../../assets/prompts/ner.txt"),
            slots: &["paragraph"],
            schema: ResponseSchema::NamedEntities,
        },
        TemplateId::TripleExtraction => &PromptTemplate {
            id: TemplateId::TripleExtraction,
            text: include_str!("../../assets/prompts/triple_extraction.txt"),
            slots: &["paragraph", "named_entities"],
            schema: ResponseSchema::TripleList,
        },
        TemplateId::CoarseSummary => &PromptTemplate {
            id: TemplateId::CoarseSummary,
            text: include_str!("../../assets/prompts/coarse_summary.txt"),
            slots: &["captions"],
            schema: ResponseSchema::FreeText,
        },
        TemplateId::Rerank => &PromptTemplate {
            id: TemplateId::Rerank,
            text: include_str!("../../assets/prompts/rerank.txt"),
            slots: &["question", "candidates"],
            schema: ResponseSchema::RankedIds,
        },
        TemplateId::SemanticExtraction => &PromptTemplate {
            id: TemplateId::SemanticExtraction,
            text: include_str!("../../assets/prompts/semantic_extraction.txt"),
            slots: &["episodic_items"],
            schema: ResponseSchema::SemanticExtraction,
        },
        TemplateId::ConsolidationJudge => &PromptTemplate {
            id: TemplateId::ConsolidationJudge,
            text: include_str!("../../assets/prompts/consolidation_judge.txt"),
            slots: &["new_triple", "existing_triples"],
            schema: ResponseSchema::JudgeDecision,
        },
        TemplateId::RetrievalDecision => &PromptTemplate {
            id: TemplateId::RetrievalDecision,
            text: include_str!("../../assets/prompts/retrieval_decision.txt"),
            slots: &["question", "round_history"],
            schema: ResponseSchema::AgentDecision,
        },
        TemplateId::Response => &PromptTemplate {
            id: TemplateId::Response,
            text: include_str!("../../assets/prompts/response.txt"),
            slots: &["question", "choices", "round_history"],
            schema: ResponseSchema::AnswerLetter,
        },
        TemplateId::FrameDescription => &PromptTemplate {
            id: TemplateId::FrameDescription,
            text: include_str!("../../assets/prompts/frame_description.txt"),
            slots: &["range"],
            schema: ResponseSchema::FreeText,
        },
    }
}

/// Fill every slot of a template. All declared slots must be provided and no
/// unknown keys are accepted; leftover `{{` markers are a bug in the template.
pub fn fill(tpl: &PromptTemplate, inputs: &BTreeMap<&str, String>) -> Result<String> {
    for key in inputs.keys() {
        if !tpl.slots.contains(key) {
            return Err(Error::Config(format!(
                "template {} has no slot {key:?}",
                tpl.id
            )));
        }
    }
    let mut text = tpl.text.to_string();
    for slot in tpl.slots {
        let value = inputs
            .get(slot)
            .ok_or_else(|| Error::Config(format!("template {} slot {slot:?} unfilled", tpl.id)))?;
        let marker = format!("{{{{{slot}}}}}");
        if !text.contains(&marker) {
            return Err(Error::Config(format!(
                "template {} text lacks marker for slot {slot:?}",
                tpl.id
            )));
        }
        text = text.replace(&marker, value);
    }
    if text.contains("{{") {
        return Err(Error::Config(format!(
            "template {} still contains unfilled markers",
            tpl.id
        )));
    }
    Ok(text)
}

/// Stable digest of a dispatch: template id, slot values, frame locators.
/// Scripted fixtures and the dispatch journal are keyed by this.
pub fn inputs_digest(id: TemplateId, inputs: &BTreeMap<&str, String>, frames: &[String]) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        template: &'a str,
        slots: &'a BTreeMap<&'a str, String>,
        frames: &'a [String],
    }
    let canonical = serde_json::to_string(&Keyed {
        template: id.as_str(),
        slots: inputs,
        frames,
    })
    .expect("digest serialization cannot fail");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_replaces_all_slots() {
        let tpl = template(TemplateId::Rerank);
        let inputs = BTreeMap::from([
            ("question", "who?".to_string()),
            ("candidates", "[c1] something".to_string()),
        ]);
        let text = fill(tpl, &inputs).unwrap();
        assert!(text.contains("who?"));
        assert!(text.contains("[c1] something"));
        assert!(!text.contains("{{"));
    }

    #[test]
    fn fill_rejects_missing_and_unknown_slots() {
        let tpl = template(TemplateId::Ner);
        assert!(fill(tpl, &BTreeMap::new()).is_err());
        let unknown = BTreeMap::from([("paragraph", "x".to_string()), ("bogus", "y".to_string())]);
        assert!(fill(tpl, &unknown).is_err());
    }

    #[test]
    fn every_template_declares_matching_markers() {
        for &id in TemplateId::all() {
            let tpl = template(id);
            let inputs: BTreeMap<&str, String> =
                tpl.slots.iter().map(|&s| (s, format!("<{s}>"))).collect();
            let text = fill(tpl, &inputs).unwrap();
            for slot in tpl.slots {
                assert!(text.contains(&format!("<{slot}>")), "{id} slot {slot}");
            }
        }
    }

    #[test]
    fn digest_is_stable_and_input_sensitive() {
        let a = BTreeMap::from([("paragraph", "one".to_string())]);
        let b = BTreeMap::from([("paragraph", "two".to_string())]);
        let d1 = inputs_digest(TemplateId::Ner, &a, &[]);
        let d2 = inputs_digest(TemplateId::Ner, &a, &[]);
        let d3 = inputs_digest(TemplateId::Ner, &b, &[]);
        assert_eq!(d1, d2);
        assert_ne!(d1, d3);
        assert_ne!(d1, inputs_digest(TemplateId::Ner, &a, &["f1".into()]));
    }
}
