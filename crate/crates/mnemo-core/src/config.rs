//! Retrieval parameters and the memory enable-mask, plus the config
//! fingerprint that stamps every evaluation report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::PprParams;

/// Which memories are active for a run (the E/S/V axes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMask {
    pub episodic: bool,
    pub semantic: bool,
    pub visual: bool,
}

impl MemoryMask {
    pub const ALL: MemoryMask = MemoryMask {
        episodic: true,
        semantic: true,
        visual: true,
    };

    pub fn none_enabled(&self) -> bool {
        !(self.episodic || self.semantic || self.visual)
    }

    /// Parse masks like `E`, `V`, `E+S`, `E+S+V` (case-insensitive).
    pub fn parse(text: &str) -> Result<Self> {
        let mut mask = MemoryMask {
            episodic: false,
            semantic: false,
            visual: false,
        };
        for part in text.split('+') {
            match part.trim().to_ascii_uppercase().as_str() {
                "E" => mask.episodic = true,
                "S" => mask.semantic = true,
                "V" => mask.visual = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown memory {other:?} in mask {text:?} (expected E, S, V)"
                    )))
                }
            }
        }
        if mask.none_enabled() {
            return Err(Error::Config(format!("empty memory mask {text:?}")));
        }
        Ok(mask)
    }
}

impl std::fmt::Display for MemoryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if self.episodic {
            parts.push("E");
        }
        if self.semantic {
            parts.push("S");
        }
        if self.visual {
            parts.push("V");
        }
        f.write_str(&parts.join("+"))
    }
}

/// All retrieval-relevant knobs. Defaults mirror the standard configuration:
/// top-5 per scale, rerank to 3, top-10 semantic triplets, 5 frames per
/// fetch, at most 5 agent iterations, 0.8 node-match and 0.6 consolidation
/// similarity thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_per_scale: usize,
    pub rerank_m: usize,
    pub semantic_k: usize,
    pub visual_k: usize,
    pub max_frames: usize,
    /// Budget N of the retrieval loop.
    pub max_iterations: usize,
    pub node_match_threshold: f64,
    pub consolidation_threshold: f64,
    pub ppr: PprParams,
    /// When false, rounds record a zero duration so trace files serialize
    /// byte-identically across runs (scripted/CI mode).
    pub record_timings: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            k_per_scale: 5,
            rerank_m: 3,
            semantic_k: 10,
            visual_k: 5,
            max_frames: 5,
            max_iterations: 5,
            node_match_threshold: 0.8,
            consolidation_threshold: 0.6,
            ppr: PprParams::default(),
            record_timings: true,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppr.validate()?;
        for (name, v) in [
            ("k_per_scale", self.k_per_scale),
            ("rerank_m", self.rerank_m),
            ("semantic_k", self.semantic_k),
            ("visual_k", self.visual_k),
            ("max_frames", self.max_frames),
            ("max_iterations", self.max_iterations),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        for (name, t) in [
            ("node_match_threshold", self.node_match_threshold),
            ("consolidation_threshold", self.consolidation_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    /// Stable fingerprint over every retrieval-relevant parameter; any
    /// change to the mask or a knob changes the fingerprint.
    pub fn fingerprint(&self, mask: MemoryMask) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            mask: String,
            config: &'a RetrievalConfig,
        }
        let canonical = serde_json::to_string(&Keyed {
            mask: mask.to_string(),
            config: self,
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
