//! Human-readable trace rendering: one block per round with decision,
//! memory, query, and retrieved items, then the final answer.

use std::collections::BTreeMap;

use mnemo_core::agent::{AgentTrace, EvidenceItem, RetrievalAction, RoundOutcome, StopReason};

pub fn render_human_trace(
    question: &str,
    choices: &BTreeMap<char, String>,
    trace: &AgentTrace,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("Question: {question}\n"));
    let rendered: Vec<String> = choices
        .iter()
        .map(|(letter, text)| format!("({letter}) {text}"))
        .collect();
    out.push_str(&rendered.join(" "));
    out.push_str("\n\n");

    for round in &trace.rounds {
        let RetrievalAction::Search { memory, query } = &round.action else {
            continue;
        };
        out.push_str(&format!("Round {}\n", round.index));
        out.push_str(&format!(
            "Decision: Search // Memory: {}\n",
            capitalize(memory.as_str())
        ));
        out.push_str(&format!("Search Query: {query}\n"));
        out.push_str("Retrieved:\n");
        match &round.outcome {
            RoundOutcome::Evidence { items } if items.is_empty() => out.push_str("(no results)\n"),
            RoundOutcome::Evidence { items } => {
                for item in items {
                    render_item(&mut out, item);
                }
            }
            RoundOutcome::Rejected { message } | RoundOutcome::Failed { message } => {
                out.push_str(&format!("ERROR: {message}\n"));
            }
        }
        out.push('\n');
    }

    let final_index = trace.rounds.len() + 1;
    match trace.stop_reason {
        StopReason::ModelStop => {
            out.push_str(&format!("Round {final_index}\nDecision: Answer\n"));
            if trace.degraded_decision {
                out.push_str("(decision degraded: unusable model output)\n");
            }
        }
        StopReason::BudgetExhausted => {
            out.push_str(&format!(
                "Round {final_index}\nDecision: Answer (budget exhausted)\n"
            ));
        }
    }
    out.push('\n');
    match trace.answer {
        Some(letter) => out.push_str(&format!("Response: {letter}\n")),
        None => out.push_str("Response: (unanswered)\n"),
    }
    out
}

fn render_item(out: &mut String, item: &EvidenceItem) {
    match item {
        EvidenceItem::Caption { range, caption, .. } => {
            out.push_str(&format!("[{}]\n{caption}\n", range.format_clock()));
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
                "[{}] visual segment {segment_id} (similarity {similarity:.4})\n",
                range.format_clock()
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

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
