//! The model-abstraction boundary: chat completion, text embedding, and
//! frame-carrying multimodal dispatch behind one trait, with prompt
//! templates as data and tolerant structured-response parsing.

mod parse;
mod recording;
mod remote;
mod scripted;
mod template;

pub use parse::{
    first_json_value, parse_agent_decision, parse_answer_letter, parse_judge_decision,
    parse_named_entities, parse_ranked_ids, parse_semantic_extraction, parse_triple_list,
    AgentDecision, JudgeDecision, RankedId, SelectedMemory, SemanticExtraction,
};
pub use recording::{DispatchKind, DispatchRecord, RecordingBackend};
pub use remote::{RemoteBackend, RemoteConfig};
pub use scripted::{
    ChatFixture, EmbedFixture, ScriptedBackend, ScriptedFixtures, DEFAULT_SCRIPTED_EMBED_DIM,
};
pub use template::{fill, inputs_digest, template, PromptTemplate, ResponseSchema, TemplateId};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An opaque reference to frame bytes, resolved by the backend, never by
/// the engine.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FramePayload {
    pub locator: String,
}

/// A rendered prompt ready for dispatch.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub template: TemplateId,
    pub prompt: String,
    pub frames: Vec<FramePayload>,
    /// Digest of (template, slot values, frame locators); the replay key.
    pub inputs_digest: String,
}

/// Chat + embedding capabilities of one configured model.
///
/// Implementations must be deterministic in scripted mode and safe for
/// concurrent dispatch; all engine state lives outside the backend.
pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<String>;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
    fn embed_dim(&self) -> usize;
    fn supports_frames(&self) -> bool {
        false
    }
}

/// Fill a template and dispatch it. Frames are rejected up front when the
/// backend cannot consume them.
pub fn complete(
    backend: &dyn ModelBackend,
    id: TemplateId,
    inputs: &BTreeMap<&str, String>,
    frames: &[FramePayload],
) -> Result<String> {
    if !frames.is_empty() && !backend.supports_frames() {
        return Err(Error::Capability {
            backend: backend.name().to_string(),
            capability: "frame payloads".to_string(),
        });
    }
    let tpl = template(id);
    let prompt = fill(tpl, inputs)?;
    let locators: Vec<String> = frames.iter().map(|f| f.locator.clone()).collect();
    let request = ChatRequest {
        template: id,
        prompt,
        frames: frames.to_vec(),
        inputs_digest: inputs_digest(id, inputs, &locators),
    };
    log::debug!(
        "dispatch template={} backend={} digest={}",
        id,
        backend.name(),
        request.inputs_digest
    );
    let response = backend.chat(&request)?;
    log::trace!("response template={}: {response}", id);
    Ok(response)
}

/// Embed non-empty text and L2-normalize the result.
pub fn embed_unit(backend: &dyn ModelBackend, text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(Error::invalid("cannot embed empty text"));
    }
    let mut v = backend.embed(text)?;
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateFeature);
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Which engine role a dispatch belongs to; each role can be assigned its
/// own backend (construction and agents may use different models).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Extractor,
    Summarizer,
    Reranker,
    Judge,
    Agent,
    Responder,
    Embedder,
    Describer,
}

impl Role {
    pub fn all() -> &'static [Role] {
        &[
            Role::Extractor,
            Role::Summarizer,
            Role::Reranker,
            Role::Judge,
            Role::Agent,
            Role::Responder,
            Role::Embedder,
            Role::Describer,
        ]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Extractor => "extractor",
            Role::Summarizer => "summarizer",
            Role::Reranker => "reranker",
            Role::Judge => "judge",
            Role::Agent => "agent",
            Role::Responder => "responder",
            Role::Embedder => "embedder",
            Role::Describer => "describer",
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-role backend assignment shared across the engine.
#[derive(Clone)]
pub struct BackendSet {
    roles: BTreeMap<Role, Arc<dyn ModelBackend>>,
}

impl BackendSet {
    /// Assign one backend to every role.
    pub fn uniform(backend: Arc<dyn ModelBackend>) -> Self {
        let roles = Role::all().iter().map(|&r| (r, backend.clone())).collect();
        BackendSet { roles }
    }

    pub fn empty() -> Self {
        BackendSet {
            roles: BTreeMap::new(),
        }
    }

    pub fn with_role(mut self, role: Role, backend: Arc<dyn ModelBackend>) -> Self {
        self.roles.insert(role, backend);
        self
    }

    pub fn get(&self, role: Role) -> Result<&dyn ModelBackend> {
        self.roles
            .get(&role)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::Config(format!("no backend assigned to role {role}")))
    }

    pub fn try_get(&self, role: Role) -> Option<&dyn ModelBackend> {
        self.roles.get(&role).map(|b| b.as_ref())
    }
}
