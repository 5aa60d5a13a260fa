//! The three memories of one stream, bundled for retrieval, persistence,
//! and evaluation.

use serde::{Deserialize, Serialize};

use crate::episodic::EpisodicMemory;
use crate::semantic::SemanticMemory;
use crate::temporal::TimescaleConfig;
use crate::visual::VisualMemory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Memories {
    pub episodic: EpisodicMemory,
    pub semantic: SemanticMemory,
    pub visual: VisualMemory,
}

impl Memories {
    pub fn new(config: TimescaleConfig) -> Self {
        let visual_scale = config.visual_scale_ms;
        Memories {
            episodic: EpisodicMemory::new(config),
            semantic: SemanticMemory::new(),
            visual: VisualMemory::new(visual_scale),
        }
    }

    pub fn timescales(&self) -> &TimescaleConfig {
        self.episodic.config()
    }

    /// One line per memory, for operator output.
    pub fn summary(&self) -> String {
        let per_scale = self
            .episodic
            .stores()
            .map(|(scale, store)| {
                format!(
                    "  episodic {scale} ms: {} segments, {} triplets, {} entities",
                    store.segments.len(),
                    store.graph.edge_count(),
                    store.graph.node_count()
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        format!(
            "{per_scale}\n  semantic: {} triplets, generation {}\n  visual: {} features, {} frames",
            self.semantic.graph().edge_count(),
            self.semantic.generation(),
            self.visual.features().len(),
            self.visual.frames().len()
        )
    }
}
