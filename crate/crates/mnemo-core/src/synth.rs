//! Deterministic synthetic corpus: a six-hour timeline with planted
//! episodic, semantic, and visual facts, matching multiple-choice questions
//! with known gold evidence, and fully scripted backends (fixtures plus
//! policy hooks) so the whole pipeline runs offline and reproducibly.
//! Used by the test suites and the CLI `demo` command.
//!
//! Construction-time model calls (entity/triple extraction, summaries,
//! semantic windows) are pre-scripted fixtures keyed by input digest.
//! Retrieval-time calls (rerank, agent decisions, response) are policy
//! hooks that act only on what the prompt shows them; recording a run
//! through [`RecordingBackend`](crate::backend::RecordingBackend) turns
//! them into replayable fixtures too.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::backend::{BackendSet, ChatRequest, ModelBackend, ScriptedBackend, TemplateId};
use crate::config::RetrievalConfig;
use crate::episodic::{caption_listing, ner_inputs, summary_inputs, triple_inputs};
use crate::error::Result;
use crate::eval::EvalItem;
use crate::pipeline::{FeatureImportRecord, FrameImportRecord, SegmentRecord};
use crate::semantic::{extraction_inputs, CaptionItem};
use crate::store::encode_vector;
use crate::temporal::{partition_timeline, Segment, SegmentId, TimeRange, TimescaleConfig};

pub const EMBED_DIM: usize = 16;
const FINE_MS: u64 = 30_000;
const TOTAL_MS: u64 = 6 * 3_600_000;

const FACT_PEOPLE: [&str; 3] = ["Alice", "Bob", "Carol"];
const FILLERS: [(&str, &str, &str, &str); 6] = [
    (
        "Dave waters the plants in the garden.",
        "Dave",
        "waters",
        "plants",
    ),
    (
        "Erin reads a magazine on the sofa.",
        "Erin",
        "reads",
        "magazine",
    ),
    (
        "Frank stirs the soup in the kitchen.",
        "Frank",
        "stirs",
        "soup",
    ),
    (
        "Dave sweeps the floor near the doorway.",
        "Dave",
        "sweeps",
        "floor",
    ),
    (
        "Erin types on the laptop at the desk.",
        "Erin",
        "types on",
        "laptop",
    ),
    (
        "Frank folds the laundry upstairs.",
        "Frank",
        "folds",
        "laundry",
    ),
];
const OBJECTS: [&str; 22] = [
    "screwdriver",
    "kettle",
    "ladder",
    "notebook",
    "umbrella",
    "wrench",
    "teapot",
    "lantern",
    "compass",
    "easel",
    "whisk",
    "stapler",
    "tripod",
    "binoculars",
    "dustpan",
    "funnel",
    "magnet",
    "pitcher",
    "quill",
    "rolling pin",
    "satchel",
    "trowel",
];

/// (subject, predicate, object-with-marker, question subject label)
const SEMANTIC_FACTS: [(&str, &str, &str); 4] = [
    ("Erin", "habitually feeds", "the neighborhood cat mk16"),
    ("Frank", "prefers", "green tea in the morning mk17"),
    ("Dave", "is a member of", "the cycling club mk18"),
    ("Carol", "usually works in", "the upstairs studio mk19"),
];
// Windows that contain a fact caption, so each window's item listing (and
// therefore its fixture key) is unique.
const SEMANTIC_WINDOWS: [usize; 4] = [3, 13, 22, 30];
const VISUAL_POSITIONS: [usize; 4] = [100, 280, 460, 640];

struct EpisodicFact {
    person: &'static str,
    object: &'static str,
    marker: String,
    position: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PlanKind {
    Episodic,
    Semantic,
    Visual,
}

#[derive(Clone)]
struct ItemPlan {
    question: String,
    kind: PlanKind,
    primary_query: String,
}

/// The generated corpus plus everything a test needs to check the engine
/// against it.
pub struct SynthWorld {
    pub timescales: TimescaleConfig,
    pub retrieval: RetrievalConfig,
    pub segments: Vec<SegmentRecord>,
    pub features: Vec<FeatureImportRecord>,
    pub frames: Vec<FrameImportRecord>,
    pub items: Vec<EvalItem>,
    /// Hand-computed from the planted construction: mean over items with
    /// gold ranges of |evidence ∩ gold| / |evidence ∪ gold|.
    pub expected_mean_tiou: f64,
    /// Expected accuracy per enable-mask string, from the planted answers.
    pub expected_accuracy: BTreeMap<String, f64>,
    fixtures: ScriptedBackend,
    plans: Vec<ItemPlan>,
}

impl SynthWorld {
    pub fn generate(seed: u64) -> SynthWorld {
        Generator::new(seed).build()
    }

    /// The single hooked backend of this world (scripted fixtures for
    /// construction, policy hooks for rerank/decision/response).
    pub fn backend(&self) -> Arc<dyn ModelBackend> {
        Arc::new(HookedBackend::new(
            self.fixtures.clone(),
            self.build_hooks(),
        ))
    }

    /// The backend assigned to every role.
    pub fn backends(&self) -> BackendSet {
        BackendSet::uniform(self.backend())
    }

    fn build_hooks(&self) -> BTreeMap<TemplateId, Hook> {
        let plans: Arc<Vec<ItemPlan>> = Arc::new(self.plans.clone());
        let mut hooks: BTreeMap<TemplateId, Hook> = BTreeMap::new();

        hooks.insert(
            TemplateId::RetrievalDecision,
            Arc::new(move |request: &ChatRequest| Ok(decide_policy(&plans, &request.prompt))),
        );
        hooks.insert(
            TemplateId::Rerank,
            Arc::new(move |request: &ChatRequest| Ok(rerank_policy(&request.prompt))),
        );
        hooks.insert(
            TemplateId::Response,
            Arc::new(move |request: &ChatRequest| Ok(response_policy(&request.prompt))),
        );
        hooks
    }
}

struct Generator {
    rng: ChaCha20Rng,
    scripted: ScriptedBackend,
    timescales: TimescaleConfig,
}

impl Generator {
    fn new(seed: u64) -> Self {
        Generator {
            rng: ChaCha20Rng::seed_from_u64(seed),
            scripted: ScriptedBackend::new()
                .with_name("synth")
                .with_embed_dim(EMBED_DIM),
            timescales: TimescaleConfig::default(),
        }
    }

    fn script_extraction(&mut self, paragraph: &str, entities: &[&str], triples: &[[&str; 3]]) {
        let entity_strings: Vec<String> = entities.iter().map(|e| e.to_string()).collect();
        self.scripted.insert_chat(
            TemplateId::Ner,
            &ner_inputs(paragraph),
            &[],
            serde_json::json!({ "named_entities": entity_strings }).to_string(),
        );
        self.scripted.insert_chat(
            TemplateId::TripleExtraction,
            &triple_inputs(paragraph, &entity_strings),
            &[],
            serde_json::json!({ "triples": triples }).to_string(),
        );
    }

    fn build(mut self) -> SynthWorld {
        let fine_count = (TOTAL_MS / FINE_MS) as usize;

        // Episodic facts: unique object at a unique fine segment.
        let facts: Vec<EpisodicFact> = (0..22)
            .map(|j| EpisodicFact {
                person: FACT_PEOPLE[j % FACT_PEOPLE.len()],
                object: OBJECTS[j],
                marker: if j < 12 {
                    format!("mk{j:02}")
                } else {
                    format!("fx{j:02}")
                },
                position: 13 + j * 31,
            })
            .collect();
        let fact_at: BTreeMap<usize, usize> = facts
            .iter()
            .enumerate()
            .map(|(j, f)| (f.position, j))
            .collect();

        // Fine captions + their extraction fixtures.
        let mut fine_captions: Vec<String> = Vec::with_capacity(fine_count);
        for i in 0..fine_count {
            let caption = match fact_at.get(&i) {
                Some(&j) => {
                    let f = &facts[j];
                    format!(
                        "{} picks up the {} and examines it (code {}).",
                        f.person, f.object, f.marker
                    )
                }
                None => FILLERS[i % FILLERS.len()].0.to_string(),
            };
            fine_captions.push(caption);
        }
        for f in &facts {
            let caption = &fine_captions[f.position];
            self.script_extraction(
                caption,
                &[f.person, f.object],
                &[[f.person, "picks up", f.object]],
            );
        }
        for (caption, subject, predicate, object) in FILLERS {
            self.script_extraction(caption, &[subject, object], &[[subject, predicate, object]]);
        }

        let segments: Vec<SegmentRecord> = (0..fine_count)
            .map(|i| SegmentRecord {
                id: format!("f{i:03}"),
                start_ms: i as u64 * FINE_MS,
                end_ms: (i as u64 + 1) * FINE_MS,
                scale_ms: FINE_MS,
                caption: fine_captions[i].clone(),
                transcript: None,
            })
            .collect();

        self.script_summaries(&facts, &fine_captions);
        self.script_semantic_windows(&segments);

        // Visual index: noise vectors everywhere, planted keyword vectors at
        // the four tagged positions. The query embeds to the identical
        // vector, so the planted segment is the exact top hit.
        let mut features = Vec::with_capacity(fine_count);
        for i in 0..fine_count {
            let (segment_id, vector) = match VISUAL_POSITIONS.iter().position(|&p| p == i) {
                Some(s) => (
                    format!("v_mk{:02}", 12 + s),
                    ScriptedBackend::hash_embedding(&visual_query(s), EMBED_DIM),
                ),
                None => (
                    format!("v{i:03}"),
                    ScriptedBackend::hash_embedding(&format!("visual-noise-{i}"), EMBED_DIM),
                ),
            };
            features.push(FeatureImportRecord {
                segment_id,
                start_ms: i as u64 * FINE_MS,
                end_ms: (i as u64 + 1) * FINE_MS,
                vector_b64: Some(encode_vector(&vector)),
                vector: None,
            });
        }
        let frames: Vec<FrameImportRecord> = (0..(TOTAL_MS / 15_000))
            .map(|t| FrameImportRecord {
                timestamp_ms: t * 15_000,
                locator: format!("frames/{:06}.jpg", t),
            })
            .collect();

        let (items, plans, expected_mean_tiou) = self.build_items(&facts);

        let expected_accuracy = BTreeMap::from([
            ("E".to_string(), 12.0 / 20.0),
            ("E+V".to_string(), 16.0 / 20.0),
            ("E+S".to_string(), 16.0 / 20.0),
            ("E+S+V".to_string(), 1.0),
        ]);

        let retrieval = RetrievalConfig {
            rerank_m: 1,
            visual_k: 1,
            record_timings: false,
            ..RetrievalConfig::default()
        };

        SynthWorld {
            timescales: self.timescales,
            retrieval,
            segments,
            features,
            frames,
            items,
            expected_mean_tiou,
            expected_accuracy,
            fixtures: self.scripted,
            plans,
        }
    }

    /// Coarse summaries at every non-fine scale, built from the next finer
    /// level exactly as the engine will request them.
    fn script_summaries(&mut self, facts: &[EpisodicFact], fine_captions: &[String]) {
        let scales = self.timescales.scales_ms.clone();
        // captions_by_scale[scale] = full ordered captions at that scale.
        let mut finer_captions: Vec<(TimeRange, String)> = (0..fine_captions.len())
            .map(|i| {
                let range = TimeRange {
                    start_ms: i as u64 * FINE_MS,
                    end_ms: (i as u64 + 1) * FINE_MS,
                };
                (range, fine_captions[i].clone())
            })
            .collect();

        for &scale_ms in &scales[1..] {
            let windows = partition_timeline(TOTAL_MS, scale_ms).unwrap();
            let mut this_level: Vec<(TimeRange, String)> = Vec::with_capacity(windows.len());
            for window in windows {
                // Overlap, not containment: scales need not divide evenly
                // (10 min over 3 min), so constituents may straddle edges —
                // exactly as the engine gathers them.
                let constituents: Vec<Segment> = finer_captions
                    .iter()
                    .filter(|(r, _)| r.overlaps(&window))
                    .map(|(r, caption)| {
                        Segment::new("tmp", *r, r.duration_ms().max(1), caption.clone(), None)
                            .unwrap()
                    })
                    .collect();
                let listing = caption_listing(constituents.iter());

                let inside: Vec<&EpisodicFact> = facts
                    .iter()
                    .filter(|f| {
                        let start = f.position as u64 * FINE_MS;
                        start >= window.start_ms && start < window.end_ms
                    })
                    .collect();
                let summary = if inside.is_empty() {
                    format!(
                        "During {} the group kept up routine household activity.",
                        window.format_clock()
                    )
                } else {
                    let sentences: Vec<String> = inside
                        .iter()
                        .map(|f| {
                            format!(
                                "{} picks up the {} and examines it (code {}).",
                                f.person, f.object, f.marker
                            )
                        })
                        .collect();
                    format!(
                        "During {}: {} Routine household activity continued.",
                        window.format_clock(),
                        sentences.join(" ")
                    )
                };
                self.scripted.insert_chat(
                    TemplateId::CoarseSummary,
                    &summary_inputs(listing),
                    &[],
                    summary.clone(),
                );
                // The summary caption itself gets extracted on ingest.
                let entities: Vec<&str> =
                    inside.iter().flat_map(|f| [f.person, f.object]).collect();
                let triples: Vec<[&str; 3]> = inside
                    .iter()
                    .map(|f| [f.person, "picks up", f.object])
                    .collect();
                self.script_extraction(&summary, &entities, &triples);
                this_level.push((window, summary));
            }
            finer_captions = this_level;
        }
    }

    fn script_semantic_windows(&mut self, segments: &[SegmentRecord]) {
        let windows = partition_timeline(TOTAL_MS, self.timescales.semantic_scale_ms).unwrap();
        for (w, window) in windows.iter().enumerate() {
            let items: Vec<CaptionItem> = segments
                .iter()
                .filter(|r| r.start_ms >= window.start_ms && r.start_ms < window.end_ms)
                .map(|r| CaptionItem {
                    segment_id: SegmentId::new(r.id.clone()),
                    range: TimeRange {
                        start_ms: r.start_ms,
                        end_ms: r.end_ms,
                    },
                    text: r.caption.clone(),
                })
                .collect();
            let response = match SEMANTIC_WINDOWS.iter().position(|&sw| sw == w) {
                Some(s) => {
                    let (subject, predicate, object) = SEMANTIC_FACTS[s];
                    serde_json::json!({
                        "semantic_triples": [[subject, predicate, object]],
                        "episodic_evidence": [[5]],
                    })
                    .to_string()
                }
                None => r#"{"semantic_triples": [], "episodic_evidence": []}"#.to_string(),
            };
            self.scripted.insert_chat(
                TemplateId::SemanticExtraction,
                &extraction_inputs(&items),
                &[],
                response,
            );
        }
    }

    fn build_items(&mut self, facts: &[EpisodicFact]) -> (Vec<EvalItem>, Vec<ItemPlan>, f64) {
        let mut items = Vec::new();
        let mut plans = Vec::new();
        let mut tiou_expect: Vec<f64> = Vec::new();

        // 12 episodic questions; the last 4 use the 3-minute parent window
        // as gold, the rest the fine segment itself.
        for (i, f) in facts.iter().take(12).enumerate() {
            let question = format!("Who picks up the {}?", f.object);
            let start = f.position as u64 * FINE_MS;
            let fine_range = TimeRange {
                start_ms: start,
                end_ms: start + FINE_MS,
            };
            let gold_range = if i < 8 {
                tiou_expect.push(1.0);
                fine_range
            } else {
                let w = start / 180_000 * 180_000;
                tiou_expect.push(FINE_MS as f64 / 180_000.0);
                TimeRange {
                    start_ms: w,
                    end_ms: w + 180_000,
                }
            };
            let others: Vec<&str> = FACT_PEOPLE
                .iter()
                .filter(|&&p| p != f.person)
                .copied()
                .collect();
            let choice_texts = [
                format!("{} (code {})", f.person, f.marker),
                format!("{} (code zz{i:02}a)", others[0]),
                format!("{} (code zz{i:02}b)", others[1]),
                format!("Nobody touched it (code zz{i:02}c)"),
            ];
            items.push(self.finish_item(
                format!("q{i:02}"),
                question.clone(),
                choice_texts,
                Some(vec![gold_range]),
                "EntityLog",
            ));
            plans.push(ItemPlan {
                question,
                kind: PlanKind::Episodic,
                primary_query: f.object.to_string(),
            });
            // Query entity extraction fixture.
            self.script_query_ner(f.object, &[f.object]);
        }

        // 4 visual questions: answerable only from the feature index.
        for (s, &position) in VISUAL_POSITIONS.iter().enumerate() {
            let i = 12 + s;
            let marker = format!("mk{i:02}");
            let question = format!("Which tagged scene does the camera capture at checkpoint {s}?");
            let start = position as u64 * FINE_MS;
            let gold_range = TimeRange {
                start_ms: start,
                end_ms: start + FINE_MS,
            };
            tiou_expect.push(1.0);
            let choice_texts = [
                format!("the scene tagged {marker}"),
                format!("the scene tagged zz{i:02}a"),
                format!("the scene tagged zz{i:02}b"),
                format!("the scene tagged zz{i:02}c"),
            ];
            items.push(self.finish_item(
                format!("q{i:02}"),
                question.clone(),
                choice_texts,
                Some(vec![gold_range]),
                "EventRecall",
            ));
            let query = visual_query(s);
            plans.push(ItemPlan {
                question,
                kind: PlanKind::Visual,
                primary_query: query.clone(),
            });
            // Fallback episodic search needs a query-entity fixture; the
            // phrase matches no graph node, so the scale comes back empty.
            self.script_query_ner(&query, &[&query]);
        }

        // 4 semantic questions: answerable only from consolidated facts.
        for (s, &(subject, _, object)) in SEMANTIC_FACTS.iter().enumerate() {
            let i = 16 + s;
            let question = format!("What is {subject} known to do regularly?");
            let choice_texts = [
                object.to_string(),
                format!("paints fences on weekends zz{i:02}a"),
                format!("collects vintage stamps zz{i:02}b"),
                format!("naps through the afternoon zz{i:02}c"),
            ];
            items.push(self.finish_item(
                format!("q{i:02}"),
                question.clone(),
                choice_texts,
                None,
                "HabitInsight",
            ));
            plans.push(ItemPlan {
                question,
                kind: PlanKind::Semantic,
                primary_query: subject.to_string(),
            });
            self.script_query_ner(subject, &[subject]);
        }

        let with_gold = tiou_expect.len();
        let expected_mean_tiou = tiou_expect.iter().sum::<f64>() / with_gold as f64;
        (items, plans, expected_mean_tiou)
    }

    fn script_query_ner(&mut self, query: &str, entities: &[&str]) {
        let entity_strings: Vec<String> = entities.iter().map(|e| e.to_string()).collect();
        self.scripted.insert_chat(
            TemplateId::Ner,
            &ner_inputs(query),
            &[],
            serde_json::json!({ "named_entities": entity_strings }).to_string(),
        );
    }

    /// Place the gold text at a random letter other than A; the response
    /// policy answers A when no planted marker shows up in the evidence,
    /// which must always be wrong.
    fn finish_item(
        &mut self,
        id: String,
        question: String,
        choice_texts: [String; 4],
        gold_ranges: Option<Vec<TimeRange>>,
        category: &str,
    ) -> EvalItem {
        let letters = ['A', 'B', 'C', 'D'];
        let gold = *['B', 'C', 'D'].choose(&mut self.rng).unwrap();
        let mut distractors = choice_texts[1..].iter();
        let mut choices = BTreeMap::new();
        for letter in letters {
            let text = if letter == gold {
                choice_texts[0].clone()
            } else {
                distractors.next().unwrap().clone()
            };
            choices.insert(letter, text);
        }
        EvalItem {
            id,
            question,
            choices,
            gold,
            gold_ranges,
            category: Some(category.to_string()),
        }
    }
}

fn visual_query(s: usize) -> String {
    format!("camera scene checkpoint {s}")
}

// ---------------------------------------------------------------------------
// Policy hooks: pure functions of the rendered prompt.

fn decide_policy(plans: &[ItemPlan], prompt: &str) -> String {
    let question = between(prompt, "# Current Query\n", "\n\n# Round History")
        .unwrap_or_default()
        .trim()
        .to_string();
    let history = after(prompt, "# Round History\n").unwrap_or_default();
    let rounds = history.matches("### Round").count();
    let has_error = history.contains("ERROR:");

    let Some(plan) = plans.iter().find(|p| p.question == question) else {
        return r#"{"decision": "answer"}"#.to_string();
    };
    let search = |memory: &str, query: &str| {
        serde_json::json!({
            "decision": "search",
            "selected_memory": { "memory_type": memory, "search_query": query },
        })
        .to_string()
    };
    if rounds == 0 {
        let memory = match plan.kind {
            PlanKind::Episodic => "episodic",
            PlanKind::Semantic => "semantic",
            PlanKind::Visual => "visual",
        };
        search(memory, &plan.primary_query)
    } else if rounds == 1 && has_error {
        search("episodic", &plan.primary_query)
    } else {
        r#"{"decision": "answer"}"#.to_string()
    }
}

/// Pick the candidate whose caption mentions the search query, preferring
/// the finest scale; nothing relevant means an empty ranking (the engine
/// then falls back to score order).
fn rerank_policy(prompt: &str) -> String {
    let query = between(prompt, "Question: ", "\n")
        .unwrap_or_default()
        .trim()
        .to_lowercase();
    let candidates = after(prompt, "Retrieved video captions:\n\n").unwrap_or_default();
    let mut best: Option<(u64, String)> = None;
    for block in candidates.split("\n\n") {
        let Some(rest) = block.strip_prefix("ID: ") else {
            continue;
        };
        let mut lines = rest.lines();
        let Some(header) = lines.next() else { continue };
        let caption: String = lines.collect::<Vec<_>>().join("\n");
        let mut parts = header.split(" | ");
        let Some(id) = parts.next() else { continue };
        let scale: u64 = parts
            .nth(1)
            .and_then(|p| p.strip_prefix("scale "))
            .and_then(|p| p.strip_suffix(" ms"))
            .and_then(|p| p.parse().ok())
            .unwrap_or(u64::MAX);
        if caption.to_lowercase().contains(&query) && best.as_ref().is_none_or(|(s, _)| scale < *s)
        {
            best = Some((scale, id.to_string()));
        }
    }
    match best {
        Some((_, id)) => serde_json::json!([id]).to_string(),
        None => "[]".to_string(),
    }
}

/// Answer the first choice whose planted marker appears in the retrieved
/// evidence (never in queries); with no marker in evidence, answer A,
/// which the generator guarantees is wrong.
fn response_policy(prompt: &str) -> String {
    let choices_text =
        between(prompt, "# Choices\n", "\n\n# Retrieval History").unwrap_or_default();
    let history = after(prompt, "# Retrieval History\n").unwrap_or_default();
    let mut retrieved = String::new();
    for block in history.split("### Round") {
        if let Some(items) = after(block, "Retrieved:\n") {
            retrieved.push_str(items);
            retrieved.push('\n');
        }
    }
    for line in choices_text.lines() {
        let Some(rest) = line.strip_prefix('(') else {
            continue;
        };
        let Some((letter, text)) = rest.split_once(") ") else {
            continue;
        };
        for marker in marker_tokens(text) {
            if retrieved.contains(&marker) {
                return letter.to_string();
            }
        }
    }
    "A".to_string()
}

fn marker_tokens(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    for i in 0..bytes.len().saturating_sub(3) {
        if &bytes[i..i + 2] == b"mk"
            && bytes[i + 2].is_ascii_digit()
            && bytes[i + 3].is_ascii_digit()
        {
            out.push(text[i..i + 4].to_string());
        }
    }
    out
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let to = text[from..].find(end)? + from;
    Some(&text[from..to])
}

fn after<'a>(text: &'a str, start: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    Some(&text[from..])
}

// ---------------------------------------------------------------------------

pub type Hook = Arc<dyn Fn(&ChatRequest) -> Result<String> + Send + Sync>;

/// A scripted backend with per-template policy hooks layered on top:
/// hooks answer templates whose inputs are only known at runtime, fixtures
/// answer everything else (and still fail loudly on unknown keys).
pub struct HookedBackend {
    scripted: ScriptedBackend,
    hooks: BTreeMap<TemplateId, Hook>,
}

impl HookedBackend {
    pub fn new(scripted: ScriptedBackend, hooks: BTreeMap<TemplateId, Hook>) -> Self {
        HookedBackend { scripted, hooks }
    }
}

impl ModelBackend for HookedBackend {
    fn name(&self) -> &str {
        "synth-hooked"
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        match self.hooks.get(&request.template) {
            Some(hook) => hook(request),
            None => self.scripted.chat(request),
        }
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.scripted.embed(text)
    }

    fn embed_dim(&self) -> usize {
        self.scripted.embed_dim()
    }

    fn supports_frames(&self) -> bool {
        true
    }
}
