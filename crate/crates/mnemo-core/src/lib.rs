//! Multimodal memory engine for long-video question answering.
//!
//! The engine consumes segmented caption and feature streams and builds
//! three complementary memories:
//!
//! - **episodic** — knowledge graphs of event triplets at multiple
//!   timescales, retrieved coarse-to-fine with Personalized PageRank and a
//!   model-driven cross-scale rerank;
//! - **semantic** — one evolving graph of long-term relational and habitual
//!   facts, maintained by embedding-gated, judge-driven consolidation;
//! - **visual** — an exact cosine top-k feature index over fixed-length
//!   segments plus a timestamp-indexed frame store.
//!
//! Queries run through an iterative retrieval agent that picks a memory and
//! a search query per round (or stops), bounded by a hard iteration budget;
//! a response model answers from the accumulated round history. All model
//! access goes through pluggable backends with a deterministic scripted
//! implementation for tests and replay.

pub mod agent;
pub mod backend;
pub mod config;
pub mod episodic;
pub mod error;
pub mod eval;
pub mod graph;
pub mod memory;
pub mod pipeline;
pub mod seeding;
pub mod semantic;
pub mod store;
pub mod synth;
pub mod temporal;
pub mod visual;

pub use agent::{AgentTrace, MemoryKind, MemoryUsage, RetrievalAction, RetrievalRound, StopReason};
pub use backend::{BackendSet, ModelBackend, Role, ScriptedBackend, TemplateId};
pub use config::{MemoryMask, RetrievalConfig};
pub use episodic::{EpisodicMemory, ScaleCandidate};
pub use error::{Error, Result};
pub use eval::{EvalItem, EvalReport};
pub use graph::{KnowledgeGraph, PprParams, PprResult, Triplet, TripletKey, TripletKind};
pub use memory::Memories;
pub use semantic::{CaptionItem, ConsolidationRecord, SemanticMemory};
pub use store::{load, save};
pub use temporal::{partition_timeline, tiou, Segment, SegmentId, TimeRange, TimescaleConfig};
pub use visual::{FeatureEntry, FrameRef, VisualMemory};
