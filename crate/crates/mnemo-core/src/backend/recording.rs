//! Record/replay support: wrap any backend, journal every dispatch, and emit
//! a fixture set that replays the session bit-identically through
//! [`ScriptedBackend`](super::ScriptedBackend).

use std::path::Path;
use std::sync::Arc;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::scripted::{ChatFixture, EmbedFixture, ScriptedFixtures};
use super::{ChatRequest, ModelBackend};
use crate::error::{Error, Result};

/// One journaled dispatch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub kind: DispatchKind,
    pub backend: String,
    pub template: Option<String>,
    pub digest: Option<String>,
    pub input: String,
    pub output: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispatchKind {
    Chat,
    Embed,
}

pub struct RecordingBackend {
    inner: Arc<dyn ModelBackend>,
    journal: Mutex<Vec<DispatchRecord>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn ModelBackend>) -> Self {
        RecordingBackend {
            inner,
            journal: Mutex::new(Vec::new()),
        }
    }

    pub fn journal(&self) -> Vec<DispatchRecord> {
        self.journal.lock().unwrap().clone()
    }

    /// Condense the journal into replayable fixtures. Later responses for
    /// the same key overwrite earlier ones, which is harmless because a
    /// deterministic inner backend repeats itself.
    pub fn fixtures(&self) -> ScriptedFixtures {
        let mut chat = Vec::new();
        let mut embeddings = Vec::new();
        let mut seen_chat = std::collections::HashSet::new();
        let mut seen_embed = std::collections::HashSet::new();
        for record in self.journal.lock().unwrap().iter() {
            match record.kind {
                DispatchKind::Chat => {
                    let key = (record.template.clone(), record.digest.clone());
                    if seen_chat.insert(key) {
                        chat.push(ChatFixture {
                            template: record.template.clone().unwrap_or_default(),
                            digest: record.digest.clone().unwrap_or_default(),
                            response: record.output.as_str().unwrap_or_default().to_string(),
                        });
                    }
                }
                DispatchKind::Embed => {
                    if seen_embed.insert(record.input.clone()) {
                        let vector: Vec<f64> =
                            serde_json::from_value(record.output.clone()).unwrap_or_default();
                        embeddings.push(EmbedFixture {
                            text: record.input.clone(),
                            vector,
                        });
                    }
                }
            }
        }
        ScriptedFixtures {
            embed_dim: self.inner.embed_dim(),
            chat,
            embeddings,
        }
    }

    pub fn save_fixtures(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.fixtures())
            .map_err(|e| Error::Config(format!("serialize fixtures: {e}")))?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn save_journal(&self, path: &Path) -> Result<()> {
        let mut lines = String::new();
        for record in self.journal.lock().unwrap().iter() {
            lines.push_str(&serde_json::to_string(record).expect("journal row serializes"));
            lines.push('\n');
        }
        std::fs::write(path, lines).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

impl ModelBackend for RecordingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        let response = self.inner.chat(request)?;
        self.journal.lock().unwrap().push(DispatchRecord {
            kind: DispatchKind::Chat,
            backend: self.inner.name().to_string(),
            template: Some(request.template.as_str().to_string()),
            digest: Some(request.inputs_digest.clone()),
            input: request.prompt.clone(),
            output: serde_json::Value::String(response.clone()),
        });
        Ok(response)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let vector = self.inner.embed(text)?;
        self.journal.lock().unwrap().push(DispatchRecord {
            kind: DispatchKind::Embed,
            backend: self.inner.name().to_string(),
            template: None,
            digest: None,
            input: text.to_string(),
            output: serde_json::to_value(&vector).expect("vector serializes"),
        });
        Ok(vector)
    }

    fn embed_dim(&self) -> usize {
        self.inner.embed_dim()
    }

    fn supports_frames(&self) -> bool {
        self.inner.supports_frames()
    }
}
