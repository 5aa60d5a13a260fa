//! End-to-end memory construction from line-delimited ingest records:
//! fine captions in, all enabled memories out. Coarse episodic captions are
//! composed bottom-up from the next finer scale unless the input already
//! carries them; semantic windows are extracted and consolidated in time
//! order; visual features and frames are indexed directly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::BackendSet;
use crate::config::{MemoryMask, RetrievalConfig};
use crate::error::{Error, Result};
use crate::memory::Memories;
use crate::semantic::CaptionItem;
use crate::store::decode_vector;
use crate::temporal::{partition_timeline, Segment, SegmentId, TimeRange, TimescaleConfig};

/// One ingest line: a captioned segment at any configured scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub scale_ms: u64,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

impl SegmentRecord {
    pub fn to_segment(&self) -> Result<Segment> {
        Segment::new(
            self.id.clone(),
            TimeRange::new(self.start_ms, self.end_ms)?,
            self.scale_ms,
            self.caption.clone(),
            self.transcript.clone(),
        )
    }
}

/// One visual feature line; the vector may be base64 of little-endian f64
/// bytes or a plain JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportRecord {
    pub segment_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

impl FeatureImportRecord {
    pub fn decode(&self) -> Result<Vec<f64>> {
        match (&self.vector_b64, &self.vector) {
            (Some(b64), _) => decode_vector(b64),
            (None, Some(v)) => Ok(v.clone()),
            (None, None) => Err(Error::Validation(format!(
                "feature {} carries neither vector_b64 nor vector",
                self.segment_id
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameImportRecord {
    pub timestamp_ms: u64,
    pub locator: String,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: T = serde_json::from_str(line)
            .map_err(|e| Error::Validation(format!("{what} line {}: {e}", lineno + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_segment_records(text: &str) -> Result<Vec<SegmentRecord>> {
    parse_lines("segment record", text)
}

pub fn parse_feature_records(text: &str) -> Result<Vec<FeatureImportRecord>> {
    parse_lines("feature record", text)
}

pub fn parse_frame_records(text: &str) -> Result<Vec<FrameImportRecord>> {
    parse_lines("frame record", text)
}

/// Build every enabled memory from parsed records.
pub fn build_memories(
    segments: &[SegmentRecord],
    features: &[FeatureImportRecord],
    frames: &[FrameImportRecord],
    timescales: &TimescaleConfig,
    retrieval: &RetrievalConfig,
    mask: MemoryMask,
    backends: &BackendSet,
) -> Result<Memories> {
    let mut memories = Memories::new(timescales.clone());
    let total_ms = segments.iter().map(|r| r.end_ms).max().unwrap_or(0);

    if mask.episodic || mask.semantic {
        if segments.is_empty() {
            log::warn!("no segment records; episodic and semantic memories stay empty");
        } else if total_ms == 0 {
            return Err(Error::Validation(
                "segment records cover an empty timeline".into(),
            ));
        }
    }

    if mask.episodic && !segments.is_empty() {
        build_episodic(&mut memories, segments, total_ms, timescales, backends)?;
    }
    if mask.semantic && !segments.is_empty() {
        build_semantic(
            &mut memories,
            segments,
            total_ms,
            timescales,
            retrieval,
            backends,
        )?;
    }
    if mask.visual {
        for record in features {
            memories.visual.index_segment(
                SegmentId::new(record.segment_id.clone()),
                TimeRange::new(record.start_ms, record.end_ms)?,
                record.decode()?,
            )?;
        }
        for record in frames {
            memories
                .visual
                .register_frame(record.timestamp_ms, record.locator.clone())?;
        }
    }
    Ok(memories)
}

fn build_episodic(
    memories: &mut Memories,
    segments: &[SegmentRecord],
    total_ms: u64,
    timescales: &TimescaleConfig,
    backends: &BackendSet,
) -> Result<()> {
    let fine = timescales.fine_scale_ms();
    let mut sorted: Vec<&SegmentRecord> = segments.iter().collect();
    sorted.sort_by_key(|r| (r.scale_ms, r.start_ms));
    for record in &sorted {
        let seg = record.to_segment()?;
        if record.scale_ms == fine {
            memories.episodic.ingest_fine_segment(seg, backends)?;
        } else {
            // Pre-captioned coarse record: extract directly, no summarization.
            memories.episodic.ingest_captioned_segment(seg, backends)?;
        }
    }
    // Compose the remaining coarse segments bottom-up.
    for &scale_ms in &timescales.scales_ms[1..] {
        for range in partition_timeline(total_ms, scale_ms)? {
            let already = memories
                .episodic
                .store(scale_ms)
                .is_some_and(|s| s.segments.values().any(|seg| seg.range == range));
            if !already {
                memories
                    .episodic
                    .ingest_coarse_segment(scale_ms, range, backends)?;
            }
        }
    }
    Ok(())
}

fn build_semantic(
    memories: &mut Memories,
    segments: &[SegmentRecord],
    total_ms: u64,
    timescales: &TimescaleConfig,
    retrieval: &RetrievalConfig,
    backends: &BackendSet,
) -> Result<()> {
    let fine = timescales.fine_scale_ms();
    for window in partition_timeline(total_ms, timescales.semantic_scale_ms)? {
        let mut items: Vec<CaptionItem> = segments
            .iter()
            .filter(|r| {
                r.scale_ms == fine && r.start_ms >= window.start_ms && r.start_ms < window.end_ms
            })
            .map(|r| {
                Ok(CaptionItem {
                    segment_id: SegmentId::new(r.id.clone()),
                    range: TimeRange::new(r.start_ms, r.end_ms)?,
                    text: r.caption.clone(),
                })
            })
            .collect::<Result<_>>()?;
        items.sort_by_key(|i| i.range.start_ms);
        if items.is_empty() {
            continue;
        }
        let batch = crate::semantic::SemanticMemory::extract_semantic(&items, backends)?;
        if batch.triplets.is_empty() {
            continue;
        }
        let ranges: BTreeMap<SegmentId, TimeRange> = items
            .iter()
            .map(|i| (i.segment_id.clone(), i.range))
            .collect();
        memories
            .semantic
            .consolidate(batch.triplets, ranges, retrieval, backends)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_parsing_reports_line_numbers() {
        let good = r#"{"id":"f0","start_ms":0,"end_ms":30000,"scale_ms":30000,"caption":"x"}"#;
        let text = format!("{good}\nnot json\n");
        let err = parse_segment_records(&text).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert_eq!(parse_segment_records(good).unwrap().len(), 1);
    }

    #[test]
    fn feature_record_decodes_both_encodings() {
        let b64 = crate::store::encode_vector(&[1.0, 0.0]);
        let rec = FeatureImportRecord {
            segment_id: "v0".into(),
            start_ms: 0,
            end_ms: 30_000,
            vector_b64: Some(b64),
            vector: None,
        };
        assert_eq!(rec.decode().unwrap(), vec![1.0, 0.0]);
        let plain = FeatureImportRecord {
            segment_id: "v1".into(),
            start_ms: 0,
            end_ms: 30_000,
            vector_b64: None,
            vector: Some(vec![0.5]),
        };
        assert_eq!(plain.decode().unwrap(), vec![0.5]);
        let neither = FeatureImportRecord {
            segment_id: "v2".into(),
            start_ms: 0,
            end_ms: 30_000,
            vector_b64: None,
            vector: None,
        };
        assert!(neither.decode().is_err());
    }
}
