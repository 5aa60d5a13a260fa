//! Durable snapshots: line-delimited record files per memory plus a
//! manifest carrying the format version and a content digest over every
//! payload byte. Saves are atomic (write to temp, then swap); loads verify
//! the digest, re-validate type invariants, and cross-check the semantic
//! graph against a journal replay. Each save is a full rewrite — at this
//! scale incremental paging buys nothing.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Triplet;
use crate::memory::Memories;
use crate::semantic::{ConsolidationRecord, SemanticMemory};
use crate::temporal::{Segment, SegmentId, TimeRange, TimescaleConfig};
use crate::visual::VisualMemory;

pub const FORMAT_VERSION: u32 = 1;

/// Snapshot manifest: everything needed to verify and reassemble the
/// payload files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub digest_algo: String,
    pub digest: String,
    pub timescales: TimescaleConfig,
    /// Relative payload paths in digest order.
    pub files: Vec<String>,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureRecord {
    segment_id: String,
    start_ms: u64,
    end_ms: u64,
    vector_b64: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    timestamp_ms: u64,
    locator: String,
}

pub fn encode_vector(vector: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(vector.len() * 8);
    for x in vector {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn decode_vector(encoded: &str) -> Result<Vec<f64>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(encoded)
        .map_err(|e| Error::Validation(format!("vector base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Validation(format!(
            "vector byte length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row).expect("record serializes");
        out.push(b'\n');
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(name: &str, bytes: &[u8]) -> Result<Vec<T>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Validation(format!("{name}: not utf-8: {e}")))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line)
            .map_err(|e| Error::Validation(format!("{name}:{}: {e}", lineno + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Build the payload files of a snapshot, in digest order.
fn payloads(memories: &Memories) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for (scale_ms, store) in memories.episodic.stores() {
        files.push((
            format!("episodic/{scale_ms}/segments.jsonl"),
            jsonl(store.segments.values()),
        ));
        files.push((
            format!("episodic/{scale_ms}/triplets.jsonl"),
            jsonl(store.graph.edges()),
        ));
    }
    files.push((
        "semantic/journal.jsonl".to_string(),
        jsonl(memories.semantic.journal()),
    ));
    files.push((
        "semantic/graph.jsonl".to_string(),
        jsonl(memories.semantic.graph().edges()),
    ));
    files.push((
        "visual/features.jsonl".to_string(),
        jsonl(memories.visual.features().iter().map(|f| FeatureRecord {
            segment_id: f.segment_id.to_string(),
            start_ms: f.range.start_ms,
            end_ms: f.range.end_ms,
            vector_b64: encode_vector(&f.vector),
        })),
    ));
    files.push((
        "visual/frames.jsonl".to_string(),
        jsonl(memories.visual.frames().iter().map(|f| FrameRecord {
            timestamp_ms: f.timestamp_ms,
            locator: f.locator.clone(),
        })),
    ));
    files
}

fn digest_files(files: &[(String, Vec<u8>)]) -> String {
    let mut hasher = Sha256::new();
    for (name, bytes) in files {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    hex::encode(hasher.finalize())
}

fn counts(memories: &Memories) -> BTreeMap<String, u64> {
    BTreeMap::from([
        (
            "episodic_segments".to_string(),
            memories.episodic.segment_count() as u64,
        ),
        (
            "episodic_triplets".to_string(),
            memories.episodic.triplet_count() as u64,
        ),
        (
            "semantic_triplets".to_string(),
            memories.semantic.graph().edge_count() as u64,
        ),
        (
            "semantic_generations".to_string(),
            memories.semantic.generation(),
        ),
        (
            "visual_features".to_string(),
            memories.visual.features().len() as u64,
        ),
        (
            "visual_frames".to_string(),
            memories.visual.frames().len() as u64,
        ),
    ])
}

/// Write a snapshot of all memories to `path` (a directory), atomically:
/// the new snapshot is staged beside the target and swapped in only once
/// complete, so a failed save leaves any prior snapshot intact.
/// Returns the content digest.
pub fn save(memories: &Memories, path: &Path) -> Result<String> {
    let files = payloads(memories);
    let digest = digest_files(&files);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        digest_algo: "sha256".to_string(),
        digest: digest.clone(),
        timescales: memories.timescales().clone(),
        files: files.iter().map(|(name, _)| name.clone()).collect(),
        counts: counts(memories),
    };

    let staging = staging_path(path);
    let write_all = || -> Result<()> {
        for (name, bytes) in &files {
            let file_path = staging.join(name);
            if let Some(parent) = file_path.parent() {
                fs::create_dir_all(parent)
                    .map_err(|e| Error::io(parent.display().to_string(), e))?;
            }
            let mut f = fs::File::create(&file_path)
                .map_err(|e| Error::io(file_path.display().to_string(), e))?;
            f.write_all(bytes)
                .map_err(|e| Error::io(file_path.display().to_string(), e))?;
        }
        let manifest_path = staging.join("manifest.json");
        let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, manifest_bytes)
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        Ok(())
    };

    fs::create_dir_all(&staging).map_err(|e| Error::io(staging.display().to_string(), e))?;
    if let Err(e) = write_all() {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }

    let backup = path.with_extension("replaced");
    if path.exists() {
        let _ = fs::remove_dir_all(&backup);
        fs::rename(path, &backup).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    if let Err(e) = fs::rename(&staging, path) {
        // Roll the prior snapshot back into place.
        if backup.exists() {
            let _ = fs::rename(&backup, path);
        }
        let _ = fs::remove_dir_all(&staging);
        return Err(Error::io(path.display().to_string(), e));
    }
    let _ = fs::remove_dir_all(&backup);
    Ok(digest)
}

fn staging_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".to_string());
    name.push_str(".staging");
    path.with_file_name(name)
}

/// Read and verify a manifest without loading payloads.
pub fn inspect(path: &Path) -> Result<Manifest> {
    let manifest_path = path.join("manifest.json");
    let bytes =
        fs::read(&manifest_path).map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Validation(format!("manifest.json: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: manifest.format_version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

/// Load a snapshot: digest-verify every payload byte, rebuild all three
/// memories, re-validate their invariants, and cross-check the semantic
/// graph against a replay of its journal.
pub fn load(path: &Path) -> Result<Memories> {
    let manifest = inspect(path)?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let file_path = path.join(name);
        let bytes =
            fs::read(&file_path).map_err(|e| Error::io(file_path.display().to_string(), e))?;
        files.push((name.clone(), bytes));
    }
    let digest = digest_files(&files);
    if digest != manifest.digest {
        return Err(Error::DigestMismatch(format!(
            "manifest says {}, payload hashes to {digest}",
            manifest.digest
        )));
    }
    let by_name: BTreeMap<&str, &[u8]> = files
        .iter()
        .map(|(name, bytes)| (name.as_str(), bytes.as_slice()))
        .collect();
    let file = |name: &str| -> Result<&[u8]> {
        by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::Validation(format!("manifest lists no {name}")))
    };

    // Episodic.
    let mut parts: BTreeMap<u64, (Vec<Segment>, Vec<Triplet>)> = BTreeMap::new();
    for &scale_ms in &manifest.timescales.scales_ms {
        let segments: Vec<Segment> = parse_jsonl(
            "segments.jsonl",
            file(&format!("episodic/{scale_ms}/segments.jsonl"))?,
        )?;
        let triplets: Vec<Triplet> = parse_jsonl(
            "triplets.jsonl",
            file(&format!("episodic/{scale_ms}/triplets.jsonl"))?,
        )?;
        parts.insert(scale_ms, (segments, triplets));
    }
    let episodic = crate::episodic::EpisodicMemory::restore(manifest.timescales.clone(), parts)?;

    // Semantic: the journal is authoritative; the stored graph must equal
    // its replay.
    let journal: Vec<ConsolidationRecord> =
        parse_jsonl("journal.jsonl", file("semantic/journal.jsonl")?)?;
    let stored_graph: Vec<Triplet> = parse_jsonl("graph.jsonl", file("semantic/graph.jsonl")?)?;
    let semantic = SemanticMemory::from_journal(journal)?;
    let replayed: BTreeMap<_, _> = semantic
        .graph()
        .edges()
        .map(|t| (t.key(), t.clone()))
        .collect();
    let stored: BTreeMap<_, _> = stored_graph.into_iter().map(|t| (t.key(), t)).collect();
    if replayed != stored {
        return Err(Error::Validation(format!(
            "semantic graph ({} edges) does not match journal replay ({} edges)",
            stored.len(),
            replayed.len()
        )));
    }

    // Visual.
    let mut visual = VisualMemory::new(manifest.timescales.visual_scale_ms);
    let features: Vec<FeatureRecord> =
        parse_jsonl("features.jsonl", file("visual/features.jsonl")?)?;
    for record in features {
        let range = TimeRange::new(record.start_ms, record.end_ms)?;
        visual.restore_entry(crate::visual::FeatureEntry {
            segment_id: SegmentId::new(record.segment_id),
            range,
            vector: decode_vector(&record.vector_b64)?,
        })?;
    }
    let frames: Vec<FrameRecord> = parse_jsonl("frames.jsonl", file("visual/frames.jsonl")?)?;
    for record in frames {
        visual.register_frame(record.timestamp_ms, record.locator)?;
    }
    validate_feature_tiling(&visual)?;

    Ok(Memories {
        episodic,
        semantic,
        visual,
    })
}

/// Feature ranges must tile the indexed prefix of the timeline: start at 0,
/// be contiguous, and all run one visual scale except a shorter tail.
fn validate_feature_tiling(visual: &VisualMemory) -> Result<()> {
    let features = visual.features();
    let scale = visual.visual_scale_ms();
    let mut cursor = 0u64;
    for (i, f) in features.iter().enumerate() {
        if f.range.start_ms != cursor {
            return Err(Error::Validation(format!(
                "feature {} starts at {} ms, expected {cursor} ms (ranges must tile)",
                f.segment_id, f.range.start_ms
            )));
        }
        let len = f.range.duration_ms();
        if len > scale || (len < scale && i + 1 != features.len()) {
            return Err(Error::Validation(format!(
                "feature {} has length {len} ms under visual scale {scale} ms",
                f.segment_id
            )));
        }
        cursor = f.range.end_ms;
    }
    Ok(())
}
