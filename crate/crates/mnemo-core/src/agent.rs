//! The adaptive retrieval loop: per iteration the agent model either picks a
//! (memory, query) pair or stops; retrieved evidence feeds the next decision
//! as rendered round history. Termination is unconditional — no model output
//! can extend the iteration budget — and a finalized trace plus the response
//! model produce the answer letter.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{
    complete, embed_unit, parse_agent_decision, parse_answer_letter, AgentDecision, BackendSet,
    FramePayload, Role, TemplateId,
};
use crate::config::{MemoryMask, RetrievalConfig};
use crate::episodic::cross_scale_rerank;
use crate::error::{Error, Result};
use crate::graph::Triplet;
use crate::memory::Memories;
use crate::temporal::{is_day_clock_range, parse_day_clock_range, SegmentId, TimeRange};
use crate::visual::FrameRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Episodic,
    Semantic,
    Visual,
}

impl MemoryKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "episodic" => Some(MemoryKind::Episodic),
            "semantic" => Some(MemoryKind::Semantic),
            "visual" => Some(MemoryKind::Visual),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MemoryKind::Episodic => "episodic",
            MemoryKind::Semantic => "semantic",
            MemoryKind::Visual => "visual",
        }
    }
}

impl std::fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the agent chose at one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum RetrievalAction {
    Search { memory: MemoryKind, query: String },
    Stop,
}

/// One piece of retrieved evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvidenceItem {
    Caption {
        segment_id: SegmentId,
        range: TimeRange,
        scale_ms: u64,
        caption: String,
    },
    Fact {
        triplet: Triplet,
    },
    VisualHit {
        segment_id: SegmentId,
        range: TimeRange,
        similarity: f64,
    },
    Frames {
        range: TimeRange,
        refs: Vec<FrameRef>,
    },
}

impl EvidenceItem {
    /// The time span this evidence covers, when it has one (triplets do not).
    pub fn range(&self) -> Option<TimeRange> {
        match self {
            EvidenceItem::Caption { range, .. }
            | EvidenceItem::VisualHit { range, .. }
            | EvidenceItem::Frames { range, .. } => Some(*range),
            EvidenceItem::Fact { .. } => None,
        }
    }
}

/// How a dispatched round ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RoundOutcome {
    Evidence {
        items: Vec<EvidenceItem>,
    },
    /// The decision named a memory the run has disabled; the rejection is
    /// shown to the model as an error observation next round.
    Rejected {
        message: String,
    },
    /// The retriever failed; the loop continues.
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRound {
    pub index: usize,
    pub action: RetrievalAction,
    pub outcome: RoundOutcome,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ModelStop,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub query: String,
    pub rounds: Vec<RetrievalRound>,
    pub stop_reason: StopReason,
    pub answer: Option<char>,
    /// Set when an unusable decision forced the stop.
    pub degraded_decision: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degraded_reason: Option<String>,
    /// Set when frame evidence reached a text-only responder as locators or
    /// substituted descriptions rather than pixels.
    pub frames_as_text: bool,
}

impl AgentTrace {
    pub fn search_round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// All evidence ranges across rounds (the tIoU numerator side).
    pub fn evidence_ranges(&self) -> Vec<TimeRange> {
        self.rounds
            .iter()
            .filter_map(|r| match &r.outcome {
                RoundOutcome::Evidence { items } => Some(items),
                _ => None,
            })
            .flatten()
            .filter_map(EvidenceItem::range)
            .collect()
    }

    /// Evidence ranges of the last evidence-bearing round only.
    pub fn final_round_ranges(&self) -> Vec<TimeRange> {
        self.rounds
            .iter()
            .rev()
            .find_map(|r| match &r.outcome {
                RoundOutcome::Evidence { items } if !items.is_empty() => Some(
                    items
                        .iter()
                        .filter_map(EvidenceItem::range)
                        .collect::<Vec<_>>(),
                ),
                _ => None,
            })
            .unwrap_or_default()
    }
}

/// Memory-selection counts of one trace; proportions are over executed
/// (non-rejected) search rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryUsage {
    pub episodic: usize,
    pub semantic: usize,
    pub visual: usize,
    pub rejected: usize,
}

impl MemoryUsage {
    pub fn from_trace(trace: &AgentTrace) -> Self {
        let mut usage = MemoryUsage::default();
        for round in &trace.rounds {
            let RetrievalAction::Search { memory, .. } = &round.action else {
                continue;
            };
            if matches!(round.outcome, RoundOutcome::Rejected { .. }) {
                usage.rejected += 1;
                continue;
            }
            match memory {
                MemoryKind::Episodic => usage.episodic += 1,
                MemoryKind::Semantic => usage.semantic += 1,
                MemoryKind::Visual => usage.visual += 1,
            }
        }
        usage
    }

    pub fn executed(&self) -> usize {
        self.episodic + self.semantic + self.visual
    }

    pub fn add(&mut self, other: &MemoryUsage) {
        self.episodic += other.episodic;
        self.semantic += other.semantic;
        self.visual += other.visual;
        self.rejected += other.rejected;
    }
}

/// Render rounds in the history format the decision prompt documents.
/// `frame_notes` substitutes descriptions for frame evidence by round index
/// (used when the responder cannot see pixels).
pub fn render_rounds(
    rounds: &[RetrievalRound],
    frame_notes: Option<&BTreeMap<usize, String>>,
) -> String {
    if rounds.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    for round in rounds {
        let (memory, query) = match &round.action {
            RetrievalAction::Search { memory, query } => (memory.as_str(), query.as_str()),
            RetrievalAction::Stop => ("-", "-"),
        };
        out.push_str(&format!(
            "### Round {}\nDecision: search\nMemory: {}\nSearch Query: {}\nRetrieved:\n",
            round.index, memory, query
        ));
        match &round.outcome {
            RoundOutcome::Evidence { items } if items.is_empty() => {
                out.push_str("(no results)\n");
            }
            RoundOutcome::Evidence { items } => {
                for item in items {
                    render_item(&mut out, item);
                }
                if let Some(note) = frame_notes.and_then(|m| m.get(&round.index)) {
                    out.push_str(&format!("Frame description: {note}\n"));
                }
            }
            RoundOutcome::Rejected { message } | RoundOutcome::Failed { message } => {
                out.push_str(&format!("ERROR: {message}\n"));
            }
        }
        out.push('\n');
    }
    out.trim_end().to_string()
}

fn render_item(out: &mut String, item: &EvidenceItem) {
    match item {
        EvidenceItem::Caption { range, caption, .. } => {
            out.push_str(&format!("[{}]\n{}\n", range.format_clock(), caption));
        }
        EvidenceItem::Fact { triplet } => {
            out.push_str(&format!(
                "[{}, {}, {}]\n",
                triplet.subject, triplet.predicate, triplet.object
            ));
        }
        EvidenceItem::VisualHit {
            segment_id,
            range,
            similarity,
        } => {
            out.push_str(&format!(
                "[{}] visual segment {} (similarity {:.4})\n",
                range.format_clock(),
                segment_id,
                similarity
            ));
        }
        EvidenceItem::Frames { range, refs } => {
            let locators: Vec<&str> = refs.iter().map(|f| f.locator.as_str()).collect();
            out.push_str(&format!(
                "[{}] {} frames: {}\n",
                range.format_clock(),
                refs.len(),
                locators.join(", ")
            ));
        }
    }
}

/// One decision step. Unusable output (unparsable JSON, unknown memory
/// type, backend failure) resolves to Stop with a degraded flag — the loop
/// fails toward answering, never toward spinning.
pub fn decide(
    query: &str,
    history: &[RetrievalRound],
    backends: &BackendSet,
) -> (RetrievalAction, Option<String>) {
    let inputs = BTreeMap::from([
        ("question", query.to_string()),
        ("round_history", render_rounds(history, None)),
    ]);
    let agent = match backends.get(Role::Agent) {
        Ok(b) => b,
        Err(e) => return (RetrievalAction::Stop, Some(e.to_string())),
    };
    let raw = match complete(agent, TemplateId::RetrievalDecision, &inputs, &[]) {
        Ok(raw) => raw,
        Err(e) => return (RetrievalAction::Stop, Some(e.to_string())),
    };
    match parse_agent_decision(&raw) {
        Ok(AgentDecision::Answer { .. }) => (RetrievalAction::Stop, None),
        Ok(AgentDecision::Search { selected_memory }) => {
            match MemoryKind::parse(&selected_memory.memory_type) {
                Some(memory) => (
                    RetrievalAction::Search {
                        memory,
                        query: selected_memory.search_query.trim().to_string(),
                    },
                    None,
                ),
                None => (
                    RetrievalAction::Stop,
                    Some(format!(
                        "unknown memory type {:?}",
                        selected_memory.memory_type
                    )),
                ),
            }
        }
        Err(e) => (RetrievalAction::Stop, Some(e.to_string())),
    }
}

fn dispatch_search(
    memory: MemoryKind,
    query: &str,
    memories: &Memories,
    config: &RetrievalConfig,
    backends: &BackendSet,
) -> Result<Vec<EvidenceItem>> {
    match memory {
        MemoryKind::Episodic => {
            let retrieval = memories
                .episodic
                .episodic_retrieve(query, config, backends)?;
            let pooled: Vec<_> = retrieval.all_candidates().into_iter().cloned().collect();
            let picked = cross_scale_rerank(query, &pooled, config.rerank_m, backends)?;
            Ok(picked
                .into_iter()
                .map(|seg| EvidenceItem::Caption {
                    segment_id: seg.id.clone(),
                    range: seg.range,
                    scale_ms: seg.scale_ms,
                    caption: seg.caption,
                })
                .collect())
        }
        MemoryKind::Semantic => {
            let retrieval = memories
                .semantic
                .semantic_retrieve(query, config, backends)?;
            Ok(retrieval
                .triplets
                .into_iter()
                .map(|(triplet, _)| EvidenceItem::Fact { triplet })
                .collect())
        }
        MemoryKind::Visual => {
            if is_day_clock_range(query) {
                let range = parse_day_clock_range(query)?;
                let refs = memories.visual.timestamp_fetch(range, config.max_frames);
                if refs.is_empty() {
                    return Ok(Vec::new());
                }
                Ok(vec![EvidenceItem::Frames { range, refs }])
            } else {
                let embedder = backends.get(Role::Embedder)?;
                let vector = embed_unit(embedder, query)?;
                let hits = memories.visual.feature_search(&vector, config.visual_k)?;
                Ok(hits
                    .into_iter()
                    .map(|(segment_id, similarity)| {
                        let range = memories
                            .visual
                            .segment_range(&segment_id)
                            .expect("hit came from the index");
                        EvidenceItem::VisualHit {
                            segment_id,
                            range,
                            similarity,
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Run the retrieval loop for one query. Every trace has at most
/// `config.max_iterations` search rounds; rejected dispatches consume
/// budget like any other round.
pub fn run(
    query: &str,
    memories: &Memories,
    mask: MemoryMask,
    config: &RetrievalConfig,
    backends: &BackendSet,
) -> Result<AgentTrace> {
    if mask.none_enabled() {
        return Err(Error::Config(
            "retrieval needs at least one enabled memory".into(),
        ));
    }
    let mut trace = AgentTrace {
        query: query.to_string(),
        rounds: Vec::new(),
        stop_reason: StopReason::BudgetExhausted,
        answer: None,
        degraded_decision: false,
        degraded_reason: None,
        frames_as_text: false,
    };
    for index in 1..=config.max_iterations {
        let (action, degraded) = decide(query, &trace.rounds, backends);
        match action {
            RetrievalAction::Stop => {
                trace.stop_reason = StopReason::ModelStop;
                if let Some(reason) = degraded {
                    log::warn!("round {index}: degraded decision ({reason}); stopping");
                    trace.degraded_decision = true;
                    trace.degraded_reason = Some(reason);
                }
                return Ok(trace);
            }
            RetrievalAction::Search { memory, query: q } => {
                let started = Instant::now();
                let enabled = match memory {
                    MemoryKind::Episodic => mask.episodic,
                    MemoryKind::Semantic => mask.semantic,
                    MemoryKind::Visual => mask.visual,
                };
                let outcome = if !enabled {
                    RoundOutcome::Rejected {
                        message: format!(
                            "memory '{memory}' is not enabled for this run; choose another memory type"
                        ),
                    }
                } else {
                    match dispatch_search(memory, &q, memories, config, backends) {
                        Ok(items) => RoundOutcome::Evidence { items },
                        Err(e) => {
                            log::warn!("round {index}: {memory} retrieval failed: {e}");
                            RoundOutcome::Failed {
                                message: e.to_string(),
                            }
                        }
                    }
                };
                let elapsed_ms = if config.record_timings {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                };
                trace.rounds.push(RetrievalRound {
                    index,
                    action: RetrievalAction::Search { memory, query: q },
                    outcome,
                    elapsed_ms,
                });
            }
        }
    }
    trace.stop_reason = StopReason::BudgetExhausted;
    Ok(trace)
}

/// Generate the final answer letter for a finalized trace. The full round
/// history goes into the prompt; frame evidence is attached as payloads for
/// multimodal responders, otherwise substituted with describer output (or
/// bare locators) and flagged on the trace.
pub fn respond(
    trace: &mut AgentTrace,
    choices: &BTreeMap<char, String>,
    backends: &BackendSet,
) -> Result<Option<char>> {
    if choices.is_empty() {
        return Err(Error::invalid("respond requires at least one choice"));
    }
    let responder = backends.get(Role::Responder)?;

    let mut frames: Vec<FramePayload> = Vec::new();
    let mut frame_rounds: Vec<(usize, TimeRange, Vec<FrameRef>)> = Vec::new();
    for round in &trace.rounds {
        if let RoundOutcome::Evidence { items } = &round.outcome {
            for item in items {
                if let EvidenceItem::Frames { range, refs } = item {
                    frames.extend(refs.iter().map(|f| FramePayload {
                        locator: f.locator.clone(),
                    }));
                    frame_rounds.push((round.index, *range, refs.clone()));
                }
            }
        }
    }

    let mut frame_notes: BTreeMap<usize, String> = BTreeMap::new();
    let attach_frames = responder.supports_frames();
    if !attach_frames && !frame_rounds.is_empty() {
        trace.frames_as_text = true;
        if let Some(describer) = backends
            .try_get(Role::Describer)
            .filter(|b| b.supports_frames())
        {
            for (round_index, range, refs) in &frame_rounds {
                let payloads: Vec<FramePayload> = refs
                    .iter()
                    .map(|f| FramePayload {
                        locator: f.locator.clone(),
                    })
                    .collect();
                let inputs = BTreeMap::from([("range", range.format_clock())]);
                match complete(describer, TemplateId::FrameDescription, &inputs, &payloads) {
                    Ok(description) => {
                        frame_notes.insert(*round_index, description);
                    }
                    Err(e) => log::warn!("frame description failed: {e}"),
                }
            }
        }
    }

    let choice_lines = choices
        .iter()
        .map(|(letter, text)| format!("({letter}) {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    let inputs = BTreeMap::from([
        ("question", trace.query.clone()),
        ("choices", choice_lines),
        (
            "round_history",
            render_rounds(&trace.rounds, Some(&frame_notes)),
        ),
    ]);
    let payloads = if attach_frames { frames } else { Vec::new() };
    let valid: std::collections::BTreeSet<char> =
        choices.keys().map(|c| c.to_ascii_uppercase()).collect();

    for attempt in 0..2 {
        let raw = complete(responder, TemplateId::Response, &inputs, &payloads)?;
        if let Some(letter) = parse_answer_letter(&raw, &valid) {
            trace.answer = Some(letter);
            return Ok(Some(letter));
        }
        log::warn!(
            "responder returned no valid letter (attempt {}): {raw:?}",
            attempt + 1
        );
    }
    trace.answer = None;
    Ok(None)
}

/// Full question answering: retrieval loop then response generation.
pub fn answer_question(
    query: &str,
    memories: &Memories,
    mask: MemoryMask,
    choices: &BTreeMap<char, String>,
    config: &RetrievalConfig,
    backends: &BackendSet,
) -> Result<AgentTrace> {
    let mut trace = run(query, memories, mask, config, backends)?;
    respond(&mut trace, choices, backends)?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ChatRequest, ModelBackend, Role, ScriptedBackend};
    use crate::temporal::TimescaleConfig;
    use std::sync::Arc;

    /// A backend that always wants another episodic search — the
    /// adversarial case for the iteration budget.
    struct AlwaysSearch;
    impl ModelBackend for AlwaysSearch {
        fn name(&self) -> &str {
            "always-search"
        }
        fn chat(&self, request: &ChatRequest) -> crate::error::Result<String> {
            match request.template {
                TemplateId::RetrievalDecision => Ok(
                    r#"{"decision":"search","selected_memory":{"memory_type":"episodic","search_query":"more"}}"#
                        .to_string(),
                ),
                _ => Ok(r#"{"named_entities": []}"#.to_string()),
            }
        }
        fn embed(&self, _text: &str) -> crate::error::Result<Vec<f64>> {
            Ok(vec![1.0])
        }
        fn embed_dim(&self) -> usize {
            1
        }
    }

    fn empty_memories() -> Memories {
        Memories::new(TimescaleConfig::default())
    }

    #[test]
    fn budget_is_unconditional() {
        let backends = BackendSet::uniform(Arc::new(AlwaysSearch));
        let trace = run(
            "q",
            &empty_memories(),
            MemoryMask::ALL,
            &RetrievalConfig::default(),
            &backends,
        )
        .unwrap();
        assert_eq!(trace.search_round_count(), 5);
        assert_eq!(trace.stop_reason, StopReason::BudgetExhausted);
    }

    #[test]
    fn immediate_stop_yields_empty_trace() {
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::RetrievalDecision,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("round_history", "(none)".to_string()),
            ]),
            &[],
            r#"{"decision": "answer"}"#,
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let trace = run(
            "q",
            &empty_memories(),
            MemoryMask::ALL,
            &RetrievalConfig::default(),
            &backends,
        )
        .unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(trace.stop_reason, StopReason::ModelStop);
        assert!(!trace.degraded_decision);
    }

    #[test]
    fn unparsable_decision_degrades_to_stop() {
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::RetrievalDecision,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("round_history", "(none)".to_string()),
            ]),
            &[],
            "I think we should search for something",
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let trace = run(
            "q",
            &empty_memories(),
            MemoryMask::ALL,
            &RetrievalConfig::default(),
            &backends,
        )
        .unwrap();
        assert!(trace.degraded_decision);
        assert_eq!(trace.stop_reason, StopReason::ModelStop);
    }

    #[test]
    fn disabled_memory_is_rejected_and_costs_budget() {
        struct WantsVisual;
        impl ModelBackend for WantsVisual {
            fn name(&self) -> &str {
                "wants-visual"
            }
            fn chat(&self, request: &ChatRequest) -> crate::error::Result<String> {
                match request.template {
                    TemplateId::RetrievalDecision => Ok(
                        r#"{"decision":"search","selected_memory":{"memory_type":"visual","search_query":"the mug"}}"#
                            .to_string(),
                    ),
                    _ => Ok("{}".to_string()),
                }
            }
            fn embed(&self, _text: &str) -> crate::error::Result<Vec<f64>> {
                Ok(vec![1.0])
            }
            fn embed_dim(&self) -> usize {
                1
            }
        }
        let backends = BackendSet::uniform(Arc::new(WantsVisual));
        let mask = MemoryMask::parse("E").unwrap();
        let trace = run(
            "q",
            &empty_memories(),
            mask,
            &RetrievalConfig::default(),
            &backends,
        )
        .unwrap();
        assert_eq!(trace.rounds.len(), 5);
        assert!(trace
            .rounds
            .iter()
            .all(|r| matches!(r.outcome, RoundOutcome::Rejected { .. })));
        let usage = MemoryUsage::from_trace(&trace);
        assert_eq!(usage.rejected, 5);
        assert_eq!(usage.executed(), 0);
        // The rejection is visible to the model in the next round's history.
        let history = render_rounds(&trace.rounds, None);
        assert!(history.contains("ERROR: memory 'visual' is not enabled"));
    }

    #[test]
    fn visual_query_routes_by_grammar() {
        assert!(is_day_clock_range("DAY2 18:34:01-18:34:29"));
        assert!(is_day_clock_range("DAY 1 00:00:00 - DAY 1 00:00:30"));
        assert!(!is_day_clock_range("the red mug on the table"));
    }

    #[test]
    fn respond_single_choice_echoes_letter() {
        let mut memories = empty_memories();
        let _ = &mut memories;
        let mut trace = AgentTrace {
            query: "q".into(),
            rounds: Vec::new(),
            stop_reason: StopReason::ModelStop,
            answer: None,
            degraded_decision: false,
            degraded_reason: None,
            frames_as_text: false,
        };
        let choices = BTreeMap::from([('A', "only option".to_string())]);
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::Response,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("choices", "(A) only option".to_string()),
                ("round_history", "(none)".to_string()),
            ]),
            &[],
            "A",
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let answer = respond(&mut trace, &choices, &backends).unwrap();
        assert_eq!(answer, Some('A'));
        assert_eq!(trace.answer, Some('A'));
    }

    #[test]
    fn respond_invalid_letter_retries_once_then_unanswered() {
        let mut trace = AgentTrace {
            query: "q".into(),
            rounds: Vec::new(),
            stop_reason: StopReason::ModelStop,
            answer: None,
            degraded_decision: false,
            degraded_reason: None,
            frames_as_text: false,
        };
        let choices = BTreeMap::from([('A', "x".to_string()), ('B', "y".to_string())]);
        let mut scripted = ScriptedBackend::new();
        scripted.insert_chat(
            TemplateId::Response,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("choices", "(A) x\n(B) y".to_string()),
                ("round_history", "(none)".to_string()),
            ]),
            &[],
            "Z is my answer",
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let answer = respond(&mut trace, &choices, &backends).unwrap();
        assert_eq!(answer, None);
        assert_eq!(trace.answer, None);
    }

    fn trace_with_frames() -> AgentTrace {
        AgentTrace {
            query: "q".into(),
            rounds: vec![RetrievalRound {
                index: 1,
                action: RetrievalAction::Search {
                    memory: MemoryKind::Visual,
                    query: "DAY1 00:00:00-00:00:30".into(),
                },
                outcome: RoundOutcome::Evidence {
                    items: vec![EvidenceItem::Frames {
                        range: TimeRange::new(0, 30_000).unwrap(),
                        refs: vec![FrameRef {
                            timestamp_ms: 5_000,
                            locator: "frames/000005.jpg".into(),
                        }],
                    }],
                },
                elapsed_ms: 0,
            }],
            stop_reason: StopReason::ModelStop,
            answer: None,
            degraded_decision: false,
            degraded_reason: None,
            frames_as_text: false,
        }
    }

    #[test]
    fn respond_attaches_frames_to_multimodal_responder() {
        let mut trace = trace_with_frames();
        let choices = BTreeMap::from([('A', "x".to_string()), ('B', "y".to_string())]);
        let mut scripted = ScriptedBackend::new();
        // The fixture is keyed with the frame locator, so a hit proves the
        // payload actually went along with the dispatch.
        scripted.insert_chat(
            TemplateId::Response,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("choices", "(A) x\n(B) y".to_string()),
                ("round_history", render_rounds(&trace.rounds, None)),
            ]),
            &["frames/000005.jpg".to_string()],
            "B",
        );
        let backends = BackendSet::uniform(Arc::new(scripted));
        let answer = respond(&mut trace, &choices, &backends).unwrap();
        assert_eq!(answer, Some('B'));
        assert!(!trace.frames_as_text);
    }

    #[test]
    fn respond_substitutes_descriptions_for_text_only_responder() {
        let mut trace = trace_with_frames();
        let choices = BTreeMap::from([('A', "x".to_string()), ('B', "y".to_string())]);

        let mut describer = ScriptedBackend::new().with_name("describer");
        describer.insert_chat(
            TemplateId::FrameDescription,
            &BTreeMap::from([("range", "DAY1 00:00:00-00:00:30".to_string())]),
            &["frames/000005.jpg".to_string()],
            "A kitchen counter with a red mug.",
        );

        let mut history_with_note = render_rounds(
            &trace.rounds,
            Some(&BTreeMap::from([(
                1usize,
                "A kitchen counter with a red mug.".to_string(),
            )])),
        );
        let mut responder = ScriptedBackend::new()
            .with_name("responder")
            .with_frames_support(false);
        responder.insert_chat(
            TemplateId::Response,
            &BTreeMap::from([
                ("question", "q".to_string()),
                ("choices", "(A) x\n(B) y".to_string()),
                ("round_history", std::mem::take(&mut history_with_note)),
            ]),
            &[],
            "A",
        );
        let backends = BackendSet::uniform(Arc::new(responder))
            .with_role(Role::Describer, Arc::new(describer));
        let answer = respond(&mut trace, &choices, &backends).unwrap();
        assert_eq!(answer, Some('A'));
        assert!(trace.frames_as_text);
    }

    #[test]
    fn trace_serialization_is_deterministic() {
        let backends = BackendSet::uniform(Arc::new(AlwaysSearch));
        let config = RetrievalConfig {
            record_timings: false,
            ..RetrievalConfig::default()
        };
        let memories = empty_memories();
        let a = run("q", &memories, MemoryMask::ALL, &config, &backends).unwrap();
        let b = run("q", &memories, MemoryMask::ALL, &config, &backends).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
