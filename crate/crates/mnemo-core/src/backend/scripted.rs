//! Deterministic fixture-driven backend for tests and offline replay.
//!
//! Chat responses are keyed by (template id, digest of filled inputs);
//! an unmatched key is a hard error — the scripted backend never improvises.
//! Embeddings default to a seeded hash-to-sphere map so identical text
//! always yields the identical unit vector; specific texts can be pinned
//! via fixture overrides.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::template::{inputs_digest, TemplateId};
use super::{ChatRequest, ModelBackend};
use crate::error::{Error, Result};

pub const DEFAULT_SCRIPTED_EMBED_DIM: usize = 64;

/// On-disk fixture set, as written by recording and read back for replay.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedFixtures {
    #[serde(default = "default_dim")]
    pub embed_dim: usize,
    #[serde(default)]
    pub chat: Vec<ChatFixture>,
    #[serde(default)]
    pub embeddings: Vec<EmbedFixture>,
}

fn default_dim() -> usize {
    DEFAULT_SCRIPTED_EMBED_DIM
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatFixture {
    pub template: String,
    pub digest: String,
    pub response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedFixture {
    pub text: String,
    pub vector: Vec<f64>,
}

pub struct ScriptedBackend {
    name: String,
    embed_dim: usize,
    multimodal: bool,
    chat: HashMap<(String, String), String>,
    embed_overrides: HashMap<String, Vec<f64>>,
    embed_cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl Clone for ScriptedBackend {
    fn clone(&self) -> Self {
        ScriptedBackend {
            name: self.name.clone(),
            embed_dim: self.embed_dim,
            multimodal: self.multimodal,
            chat: self.chat.clone(),
            embed_overrides: self.embed_overrides.clone(),
            embed_cache: Mutex::new(HashMap::new()),
        }
    }
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend {
            name: "scripted".to_string(),
            embed_dim: DEFAULT_SCRIPTED_EMBED_DIM,
            multimodal: true,
            chat: HashMap::new(),
            embed_overrides: HashMap::new(),
            embed_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_embed_dim(mut self, dim: usize) -> Self {
        self.embed_dim = dim;
        self
    }

    /// Scripted backends accept frames by default; turn this off to stand
    /// in for a text-only model.
    pub fn with_frames_support(mut self, multimodal: bool) -> Self {
        self.multimodal = multimodal;
        self
    }

    pub fn from_fixtures(fixtures: ScriptedFixtures) -> Self {
        let mut backend = ScriptedBackend::new().with_embed_dim(fixtures.embed_dim);
        for f in fixtures.chat {
            backend.chat.insert((f.template, f.digest), f.response);
        }
        for f in fixtures.embeddings {
            backend.embed_overrides.insert(f.text, f.vector);
        }
        backend
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let fixtures: ScriptedFixtures = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("fixture file {}: {e}", path.display())))?;
        Ok(Self::from_fixtures(fixtures))
    }

    /// Register a canned response for a dispatch, keyed the same way the
    /// engine keys it: template id plus digest of the filled slot values.
    pub fn insert_chat(
        &mut self,
        id: TemplateId,
        inputs: &BTreeMap<&str, String>,
        frames: &[String],
        response: impl Into<String>,
    ) {
        let digest = inputs_digest(id, inputs, frames);
        self.chat
            .insert((id.as_str().to_string(), digest), response.into());
    }

    pub fn insert_chat_digest(
        &mut self,
        template: impl Into<String>,
        digest: impl Into<String>,
        response: impl Into<String>,
    ) {
        self.chat
            .insert((template.into(), digest.into()), response.into());
    }

    pub fn insert_embedding(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        self.embed_overrides.insert(text.into(), vector);
    }

    /// The deterministic hash-to-sphere embedding used when no override is
    /// pinned: a ChaCha stream seeded from sha256(text), normalized.
    pub fn hash_embedding(text: &str, dim: usize) -> Vec<f64> {
        let seed: [u8; 32] = Sha256::digest(text.as_bytes()).into();
        let mut rng = ChaCha20Rng::from_seed(seed);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A zero draw is astronomically unlikely; fall back to a basis vector.
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        let key = (
            request.template.as_str().to_string(),
            request.inputs_digest.clone(),
        );
        self.chat.get(&key).cloned().ok_or_else(|| Error::Backend {
            backend: self.name.clone(),
            message: format!(
                "no fixture for template {:?} digest {}; prompt head: {:?}",
                request.template.as_str(),
                request.inputs_digest,
                request.prompt.chars().take(120).collect::<String>()
            ),
            retryable: false,
        })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.embed_overrides.get(text) {
            return Ok(v.clone());
        }
        let mut cache = self.embed_cache.lock().unwrap();
        let v = cache
            .entry(text.to_string())
            .or_insert_with(|| Self::hash_embedding(text, self.embed_dim));
        Ok(v.clone())
    }

    fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    fn supports_frames(&self) -> bool {
        self.multimodal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::complete;

    #[test]
    fn chat_hits_fixture_and_misses_loudly() {
        let mut backend = ScriptedBackend::new();
        let inputs = BTreeMap::from([("paragraph", "hello".to_string())]);
        backend.insert_chat(TemplateId::Ner, &inputs, &[], r#"{"named_entities": []}"#);

        let out = complete(&backend, TemplateId::Ner, &inputs, &[]).unwrap();
        assert_eq!(out, r#"{"named_entities": []}"#);

        let other = BTreeMap::from([("paragraph", "different".to_string())]);
        let err = complete(&backend, TemplateId::Ner, &other, &[]).unwrap_err();
        assert!(matches!(
            err,
            Error::Backend {
                retryable: false,
                ..
            }
        ));
    }

    #[test]
    fn embeddings_are_deterministic_unit_vectors() {
        let backend = ScriptedBackend::new();
        let a = backend.embed("air conditioning").unwrap();
        let b = backend.embed("air conditioning").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), DEFAULT_SCRIPTED_EMBED_DIM);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distinct_texts_do_not_collide() {
        let backend = ScriptedBackend::new();
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000 {
            let v = backend.embed(&format!("text-{i}")).unwrap();
            let bits: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(bits), "duplicate embedding at {i}");
        }
    }

    #[test]
    fn fixture_file_round_trip() {
        let fixtures = ScriptedFixtures {
            embed_dim: 8,
            chat: vec![ChatFixture {
                template: "ner".into(),
                digest: "d".into(),
                response: "r".into(),
            }],
            embeddings: vec![EmbedFixture {
                text: "t".into(),
                vector: vec![1.0, 0.0],
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixtures.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&fixtures).unwrap()).unwrap();
        let backend = ScriptedBackend::from_file(&path).unwrap();
        assert_eq!(backend.embed_dim(), 8);
        assert_eq!(backend.embed("t").unwrap(), vec![1.0, 0.0]);
    }
}
