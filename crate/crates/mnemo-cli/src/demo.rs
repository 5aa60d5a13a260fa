//! The `demo` command: generate the deterministic synthetic corpus, run the
//! whole pipeline once against its policy backends while recording every
//! model dispatch, and write a directory that replays fully offline through
//! digest-keyed scripted fixtures.

use std::path::Path;
use std::sync::Arc;

use mnemo_core::backend::{BackendSet, RecordingBackend};
use mnemo_core::config::MemoryMask;
use mnemo_core::error::{Error, Result};
use mnemo_core::eval::{self, EvalOptions};
use mnemo_core::pipeline;
use mnemo_core::synth::SynthWorld;

use crate::config::{BackendDecl, EvalSection, FileConfig};

fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn cmd_demo(out: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let world = SynthWorld::generate(seed);

    write_jsonl(&out.join("segments.jsonl"), &world.segments)?;
    write_jsonl(&out.join("features.jsonl"), &world.features)?;
    write_jsonl(&out.join("frames.jsonl"), &world.frames)?;
    let mut evalset = String::new();
    for item in &world.items {
        evalset.push_str(&serde_json::to_string(item).expect("item serializes"));
        evalset.push('\n');
    }
    let evalset_path = out.join("evalset.jsonl");
    std::fs::write(&evalset_path, evalset)
        .map_err(|e| Error::io(evalset_path.display().to_string(), e))?;

    // One recorded pass over construction and evaluation turns the policy
    // hooks into replayable digest-keyed fixtures.
    let recorder = Arc::new(RecordingBackend::new(world.backend()));
    let backends = BackendSet::uniform(recorder.clone());
    let memories = pipeline::build_memories(
        &world.segments,
        &world.features,
        &world.frames,
        &world.timescales,
        &world.retrieval,
        MemoryMask::ALL,
        &backends,
    )?;
    // Record every documented ablation mask so all of them replay cleanly.
    let masks: Vec<MemoryMask> = ["E", "E+V", "E+S", "E+S+V"]
        .iter()
        .map(|m| MemoryMask::parse(m))
        .collect::<mnemo_core::Result<_>>()?;
    let reports = eval::ablation_matrix(
        &world.items,
        &memories,
        &masks,
        &world.retrieval,
        &backends,
        &EvalOptions::default(),
    )?;
    let full = reports.last().expect("one report per mask");
    if full.overall_accuracy < 1.0 {
        return Err(Error::Validation(format!(
            "demo corpus should evaluate to accuracy 1.0 under E+S+V, got {}",
            full.overall_accuracy
        )));
    }
    recorder.save_fixtures(&out.join("fixtures.json"))?;
    recorder.save_journal(&out.join("dispatch_journal.jsonl"))?;

    let file = FileConfig {
        memories: Some("E+S+V".to_string()),
        timescales: Some(world.timescales.clone()),
        retrieval: Some(world.retrieval.clone()),
        backends: [(
            "demo".to_string(),
            BackendDecl::Scripted {
                fixtures: "fixtures.json".into(),
            },
        )]
        .into(),
        roles: [("default".to_string(), "demo".to_string())].into(),
        eval: EvalSection {
            parallelism: Some(1),
        },
    };
    file.save(&out.join("config.toml"))?;

    println!("demo corpus written to {}", out.display());
    println!("next steps:");
    println!(
        "  mnemo --config {0}/config.toml ingest --segments {0}/segments.jsonl --features {0}/features.jsonl --frames {0}/frames.jsonl --out {0}/snapshot",
        out.display()
    );
    println!(
        "  mnemo --config {0}/config.toml eval --snapshot {0}/snapshot --evalset {0}/evalset.jsonl --report-dir {0}/reports",
        out.display()
    );
    Ok(())
}
