//! Evaluation harness: multiple-choice accuracy, temporal IoU of retrieved
//! evidence against gold ranges, per-memory usage breakdowns, and ablation
//! runs over memory enable-masks. A report is a pure fold over per-item
//! traces, so it can always be recomputed from stored trace files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{answer_question, AgentTrace, MemoryUsage};
use crate::backend::BackendSet;
use crate::config::{MemoryMask, RetrievalConfig};
use crate::error::{Error, Result};
use crate::memory::Memories;
use crate::temporal::{parse_day_clock, tiou, TimeRange};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub question: String,
    pub choices: BTreeMap<char, String>,
    pub gold: char,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_ranges: Option<Vec<TimeRange>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl EvalItem {
    pub fn validate(&self) -> Result<()> {
        if self.choices.is_empty() {
            return Err(Error::Validation(format!("item {}: no choices", self.id)));
        }
        if !self.choices.contains_key(&self.gold) {
            return Err(Error::Validation(format!(
                "item {}: gold letter {:?} is not a choice",
                self.id, self.gold
            )));
        }
        if let Some(ranges) = &self.gold_ranges {
            if ranges.is_empty() {
                return Err(Error::Validation(format!(
                    "item {}: gold_ranges present but empty",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Wire form of an eval item: gold ranges may be millisecond pairs or
/// `DAY X HH:MM:SS` clock strings.
#[derive(Debug, Deserialize)]
struct EvalItemRecord {
    id: String,
    question: String,
    choices: BTreeMap<char, String>,
    gold: char,
    #[serde(default)]
    gold_ranges: Option<Vec<RangeSpec>>,
    #[serde(default)]
    category: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RangeSpec {
    Ms([u64; 2]),
    Clock([String; 2]),
    Range { start_ms: u64, end_ms: u64 },
}

/// Parse a line-delimited eval set.
pub fn parse_eval_items(text: &str) -> Result<Vec<EvalItem>> {
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalItemRecord = serde_json::from_str(line)
            .map_err(|e| Error::Validation(format!("eval item line {}: {e}", lineno + 1)))?;
        let gold_ranges = match record.gold_ranges {
            None => None,
            Some(specs) => {
                let mut ranges = Vec::with_capacity(specs.len());
                for spec in specs {
                    let range = match spec {
                        RangeSpec::Ms([start, end]) => TimeRange::new(start, end)?,
                        RangeSpec::Clock([start, end]) => {
                            TimeRange::new(parse_day_clock(&start)?, parse_day_clock(&end)?)?
                        }
                        RangeSpec::Range { start_ms, end_ms } => TimeRange::new(start_ms, end_ms)?,
                    };
                    ranges.push(range);
                }
                Some(ranges)
            }
        };
        let item = EvalItem {
            id: record.id,
            question: record.question,
            choices: record.choices,
            gold: record.gold,
            gold_ranges,
            category: record.category,
        };
        item.validate()?;
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    pub answer: Option<char>,
    pub gold: char,
    pub correct: bool,
    /// tIoU of the union of all retrieved evidence ranges vs gold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiou_all_rounds: Option<f64>,
    /// Alternative accounting: only the final evidence-bearing round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiou_final_round: Option<f64>,
    pub usage: MemoryUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mask: String,
    pub config_fingerprint: String,
    pub total: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    pub per_category: BTreeMap<String, CategoryStats>,
    /// Mean over items that carry gold ranges; absent when none do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tiou_all_rounds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_tiou_final_round: Option<f64>,
    pub tiou_items: usize,
    pub usage: MemoryUsage,
    /// Share of executed search rounds per memory, over the whole run.
    pub usage_proportions: BTreeMap<String, f64>,
    pub per_category_usage: BTreeMap<String, MemoryUsage>,
    pub traces_digest: String,
    pub items: Vec<ItemResult>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Directory receiving one `<item id>.trace.json` per item.
    pub trace_dir: Option<PathBuf>,
    /// Concurrent items; 0 or 1 means sequential.
    pub parallelism: usize,
}

/// Score one finished trace against its item — the pure per-item fold step.
pub fn item_result(item: &EvalItem, trace: &AgentTrace) -> ItemResult {
    let correct = trace.answer == Some(item.gold);
    let (tiou_all, tiou_final) = match &item.gold_ranges {
        Some(gold) => {
            let all = tiou(&trace.evidence_ranges(), gold).unwrap_or(0.0);
            let fin = tiou(&trace.final_round_ranges(), gold).unwrap_or(0.0);
            (Some(all), Some(fin))
        }
        None => (None, None),
    };
    ItemResult {
        id: item.id.clone(),
        category: item.category.clone(),
        answer: trace.answer,
        gold: item.gold,
        correct,
        tiou_all_rounds: tiou_all,
        tiou_final_round: tiou_final,
        usage: MemoryUsage::from_trace(trace),
        flagged: None,
    }
}

fn failed_result(item: &EvalItem, message: String) -> ItemResult {
    let zeroes = item.gold_ranges.as_ref().map(|_| 0.0);
    ItemResult {
        id: item.id.clone(),
        category: item.category.clone(),
        answer: None,
        gold: item.gold,
        correct: false,
        tiou_all_rounds: zeroes,
        tiou_final_round: zeroes,
        usage: MemoryUsage::default(),
        flagged: Some(message),
    }
}

/// Aggregate per-item results into a report. Pure: feeding it results
/// recomputed from stored traces reproduces the identical report.
pub fn fold_report(
    mask: MemoryMask,
    config: &RetrievalConfig,
    mut results: Vec<ItemResult>,
    traces_digest: String,
) -> EvalReport {
    results.sort_by(|a, b| a.id.cmp(&b.id));
    let total = results.len();
    let correct = results.iter().filter(|r| r.correct).count();

    let mut per_category: BTreeMap<String, CategoryStats> = BTreeMap::new();
    let mut per_category_usage: BTreeMap<String, MemoryUsage> = BTreeMap::new();
    let mut usage = MemoryUsage::default();
    for r in &results {
        let category = r.category.clone().unwrap_or_else(|| "uncategorized".into());
        let stats = per_category
            .entry(category.clone())
            .or_insert(CategoryStats {
                total: 0,
                correct: 0,
                accuracy: 0.0,
            });
        stats.total += 1;
        stats.correct += usize::from(r.correct);
        per_category_usage
            .entry(category)
            .or_default()
            .add(&r.usage);
        usage.add(&r.usage);
    }
    for stats in per_category.values_mut() {
        stats.accuracy = stats.correct as f64 / stats.total as f64;
    }

    let with_gold: Vec<&ItemResult> = results
        .iter()
        .filter(|r| r.tiou_all_rounds.is_some())
        .collect();
    let tiou_items = with_gold.len();
    let mean = |pick: fn(&ItemResult) -> Option<f64>| -> Option<f64> {
        if with_gold.is_empty() {
            None
        } else {
            Some(with_gold.iter().filter_map(|r| pick(r)).sum::<f64>() / with_gold.len() as f64)
        }
    };

    let executed = usage.executed();
    let proportion = |n: usize| {
        if executed == 0 {
            0.0
        } else {
            n as f64 / executed as f64
        }
    };
    let usage_proportions = BTreeMap::from([
        ("episodic".to_string(), proportion(usage.episodic)),
        ("semantic".to_string(), proportion(usage.semantic)),
        ("visual".to_string(), proportion(usage.visual)),
    ]);

    EvalReport {
        mask: mask.to_string(),
        config_fingerprint: config.fingerprint(mask),
        total,
        correct,
        overall_accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        per_category,
        mean_tiou_all_rounds: mean(|r| r.tiou_all_rounds),
        mean_tiou_final_round: mean(|r| r.tiou_final_round),
        tiou_items,
        usage,
        usage_proportions,
        per_category_usage,
        traces_digest,
        items: results,
    }
}

fn check_mask_built(mask: MemoryMask, memories: &Memories) -> Result<()> {
    if mask.episodic && memories.episodic.is_empty() {
        return Err(Error::Config(
            "mask enables episodic memory but it is empty".into(),
        ));
    }
    if mask.semantic && memories.semantic.is_empty() {
        return Err(Error::Config(
            "mask enables semantic memory but it is empty".into(),
        ));
    }
    if mask.visual && memories.visual.is_empty() {
        return Err(Error::Config(
            "mask enables visual memory but it is empty".into(),
        ));
    }
    Ok(())
}

/// Evaluate every item under one mask. Per-item failures are recorded as
/// incorrect and flagged; they never abort the batch.
pub fn run_eval(
    items: &[EvalItem],
    memories: &Memories,
    mask: MemoryMask,
    config: &RetrievalConfig,
    backends: &BackendSet,
    options: &EvalOptions,
) -> Result<EvalReport> {
    check_mask_built(mask, memories)?;
    for item in items {
        item.validate()?;
    }
    if let Some(dir) = &options.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }

    let evaluate = |item: &EvalItem| -> (ItemResult, Option<(String, String)>) {
        match answer_question(
            &item.question,
            memories,
            mask,
            &item.choices,
            config,
            backends,
        ) {
            Ok(trace) => {
                let result = item_result(item, &trace);
                (result, Some((item.id.clone(), trace.to_json())))
            }
            Err(e) => {
                log::warn!("item {} failed: {e}", item.id);
                (failed_result(item, e.to_string()), None)
            }
        }
    };

    let mut scored: Vec<(ItemResult, Option<(String, String)>)> =
        if options.parallelism > 1 && items.len() > 1 {
            let next = AtomicUsize::new(0);
            let collected: Mutex<Vec<_>> = Mutex::new(Vec::with_capacity(items.len()));
            let workers = options.parallelism.min(items.len());
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        let outcome = evaluate(item);
                        collected.lock().unwrap().push(outcome);
                    });
                }
            });
            collected.into_inner().unwrap()
        } else {
            items.iter().map(evaluate).collect()
        };
    scored.sort_by(|(a, _), (b, _)| a.id.cmp(&b.id));

    let mut hasher = Sha256::new();
    let mut results = Vec::with_capacity(scored.len());
    for (result, trace) in scored {
        if let Some((id, json)) = &trace {
            hasher.update(id.as_bytes());
            hasher.update([0u8]);
            hasher.update(json.as_bytes());
            hasher.update(*b"\n");
            if let Some(dir) = &options.trace_dir {
                let path = dir.join(format!("{id}.trace.json"));
                std::fs::write(&path, json)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
            }
        }
        results.push(result);
    }
    Ok(fold_report(
        mask,
        config,
        results,
        hex::encode(hasher.finalize()),
    ))
}

/// One report per mask over shared memories and items.
pub fn ablation_matrix(
    items: &[EvalItem],
    memories: &Memories,
    masks: &[MemoryMask],
    config: &RetrievalConfig,
    backends: &BackendSet,
    options: &EvalOptions,
) -> Result<Vec<EvalReport>> {
    if masks.is_empty() {
        return Err(Error::Config("ablation needs at least one mask".into()));
    }
    for mask in masks {
        check_mask_built(*mask, memories)?;
    }
    let mut reports = Vec::with_capacity(masks.len());
    for mask in masks {
        let mask_options = EvalOptions {
            trace_dir: options
                .trace_dir
                .as_ref()
                .map(|d| d.join(mask.to_string().replace('+', "_"))),
            parallelism: options.parallelism,
        };
        reports.push(run_eval(
            items,
            memories,
            *mask,
            config,
            backends,
            &mask_options,
        )?);
    }
    Ok(reports)
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// Emit the machine-readable report plus plot-ready tables.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let json_path = dir.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_vec_pretty(report).expect("report serializes"),
    )
    .map_err(|e| Error::io(json_path.display().to_string(), e))?;

    let mut summary = String::from("category,total,correct,accuracy\n");
    summary.push_str(&format!(
        "overall,{},{},{:.6}\n",
        report.total, report.correct, report.overall_accuracy
    ));
    for (category, stats) in &report.per_category {
        summary.push_str(&format!(
            "{},{},{},{:.6}\n",
            csv_field(category),
            stats.total,
            stats.correct,
            stats.accuracy
        ));
    }
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, summary)
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;

    let mut usage = String::from("category,episodic,semantic,visual,rejected\n");
    usage.push_str(&format!(
        "overall,{},{},{},{}\n",
        report.usage.episodic, report.usage.semantic, report.usage.visual, report.usage.rejected
    ));
    for (category, u) in &report.per_category_usage {
        usage.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(category),
            u.episodic,
            u.semantic,
            u.visual,
            u.rejected
        ));
    }
    let usage_path = dir.join("usage.csv");
    std::fs::write(&usage_path, usage)
        .map_err(|e| Error::io(usage_path.display().to_string(), e))?;

    let mut items =
        String::from("id,category,answer,gold,correct,tiou_all_rounds,tiou_final_round,flagged\n");
    for r in &report.items {
        items.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&r.id),
            csv_field(r.category.as_deref().unwrap_or("")),
            r.answer.map(String::from).unwrap_or_default(),
            r.gold,
            r.correct,
            r.tiou_all_rounds
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default(),
            r.tiou_final_round
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default(),
            csv_field(r.flagged.as_deref().unwrap_or("")),
        ));
    }
    let items_path = dir.join("items.csv");
    std::fs::write(&items_path, items)
        .map_err(|e| Error::io(items_path.display().to_string(), e))?;
    Ok(())
}
