//! Dual-mode visual memory: exact cosine top-k over unit-norm segment
//! features, and timestamp-indexed frame references with uniform
//! subsampling. No approximate index at this scale — search is a full scan
//! and must stay exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{SegmentId, TimeRange};

/// A fixed-length segment's L2-normalized feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub segment_id: SegmentId,
    pub range: TimeRange,
    pub vector: Vec<f64>,
}

/// A frame reference: timestamp plus an opaque locator (path or object
/// key). The engine never decodes frame bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub timestamp_ms: u64,
    pub locator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualMemory {
    visual_scale_ms: u64,
    /// Sorted by range start; dimension fixed by the first insert.
    features: Vec<FeatureEntry>,
    /// Sorted by timestamp, strictly increasing.
    frames: Vec<FrameRef>,
}

impl VisualMemory {
    pub fn new(visual_scale_ms: u64) -> Self {
        VisualMemory {
            visual_scale_ms,
            features: Vec::new(),
            frames: Vec::new(),
        }
    }

    pub fn visual_scale_ms(&self) -> u64 {
        self.visual_scale_ms
    }

    pub fn features(&self) -> &[FeatureEntry] {
        &self.features
    }

    pub fn frames(&self) -> &[FrameRef] {
        &self.frames
    }

    pub fn dimension(&self) -> Option<usize> {
        self.features.first().map(|f| f.vector.len())
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.frames.is_empty()
    }

    /// Normalize and index one segment feature. Order of calls does not
    /// matter; the index keeps itself sorted by time.
    pub fn index_segment(
        &mut self,
        segment_id: SegmentId,
        range: TimeRange,
        raw_vector: Vec<f64>,
    ) -> Result<()> {
        if let Some(dim) = self.dimension() {
            if raw_vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: raw_vector.len(),
                });
            }
        } else if raw_vector.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let norm: f64 = raw_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateFeature);
        }
        if self.features.iter().any(|f| f.segment_id == segment_id) {
            return Err(Error::Validation(format!(
                "feature for segment {segment_id} already indexed"
            )));
        }
        let vector = raw_vector.into_iter().map(|x| x / norm).collect();
        let entry = FeatureEntry {
            segment_id,
            range,
            vector,
        };
        let at = self.features.partition_point(|f| {
            (f.range.start_ms, f.segment_id.as_str()) <= (range.start_ms, entry.segment_id.as_str())
        });
        self.features.insert(at, entry);
        Ok(())
    }

    /// Insert an already-normalized entry without renormalizing (snapshot
    /// load path — keeps stored bits intact). The unit-norm invariant is
    /// re-validated to 1e-6.
    pub fn restore_entry(&mut self, entry: FeatureEntry) -> Result<()> {
        if let Some(dim) = self.dimension() {
            if entry.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: entry.vector.len(),
                });
            }
        }
        let norm: f64 = entry.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "stored feature {} has norm {norm}, expected 1 ± 1e-6",
                entry.segment_id
            )));
        }
        if self
            .features
            .iter()
            .any(|f| f.segment_id == entry.segment_id)
        {
            return Err(Error::Validation(format!(
                "feature for segment {} already indexed",
                entry.segment_id
            )));
        }
        let at = self.features.partition_point(|f| {
            (f.range.start_ms, f.segment_id.as_str())
                <= (entry.range.start_ms, entry.segment_id.as_str())
        });
        self.features.insert(at, entry);
        Ok(())
    }

    /// Register a frame reference; duplicate timestamps are rejected to
    /// keep the index strictly increasing.
    pub fn register_frame(&mut self, timestamp_ms: u64, locator: impl Into<String>) -> Result<()> {
        let at = self
            .frames
            .partition_point(|f| f.timestamp_ms < timestamp_ms);
        if self
            .frames
            .get(at)
            .is_some_and(|f| f.timestamp_ms == timestamp_ms)
        {
            return Err(Error::Validation(format!(
                "frame at {timestamp_ms} ms already registered"
            )));
        }
        self.frames.insert(
            at,
            FrameRef {
                timestamp_ms,
                locator: locator.into(),
            },
        );
        Ok(())
    }

    /// Exact top-k by cosine similarity (dot product of unit vectors),
    /// ties broken by earlier start, then segment id.
    pub fn feature_search(&self, query_vector: &[f64], k: usize) -> Result<Vec<(SegmentId, f64)>> {
        if self.features.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let dim = self.dimension().expect("non-empty index");
        if query_vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: query_vector.len(),
            });
        }
        let norm: f64 = query_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateFeature);
        }
        let unit: Vec<f64> = query_vector.iter().map(|x| x / norm).collect();
        let mut scored: Vec<(&FeatureEntry, f64)> = self
            .features
            .iter()
            .map(|f| {
                let sim: f64 = f.vector.iter().zip(&unit).map(|(a, b)| a * b).sum();
                (f, sim)
            })
            .collect();
        scored.sort_by(|(fa, sa), (fb, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| fa.range.start_ms.cmp(&fb.range.start_ms))
                .then_with(|| fa.segment_id.cmp(&fb.segment_id))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(f, sim)| (f.segment_id.clone(), sim))
            .collect())
    }

    /// The range of an indexed segment, for rendering search hits.
    pub fn segment_range(&self, id: &SegmentId) -> Option<TimeRange> {
        self.features
            .iter()
            .find(|f| &f.segment_id == id)
            .map(|f| f.range)
    }

    /// All frames with timestamps in `[start, end)`, uniformly subsampled
    /// to at most `max_frames` preserving order.
    pub fn timestamp_fetch(&self, range: TimeRange, max_frames: usize) -> Vec<FrameRef> {
        let lo = self
            .frames
            .partition_point(|f| f.timestamp_ms < range.start_ms);
        let hi = self
            .frames
            .partition_point(|f| f.timestamp_ms < range.end_ms);
        let in_range = &self.frames[lo..hi];
        uniform_subsample_indices(in_range.len(), max_frames)
            .into_iter()
            .map(|i| in_range[i].clone())
            .collect()
    }
}

/// Pick `m` of `n` indices uniformly: `floor(i·(n−1)/(m−1))` for
/// `i = 0..m`, keeping first and last.
pub fn uniform_subsample_indices(n: usize, m: usize) -> Vec<usize> {
    if m == 0 || n == 0 {
        return Vec::new();
    }
    if n <= m {
        return (0..n).collect();
    }
    if m == 1 {
        return vec![0];
    }
    (0..m).map(|i| i * (n - 1) / (m - 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: u64, e: u64) -> TimeRange {
        TimeRange::new(s, e).unwrap()
    }

    #[test]
    fn index_normalizes_vectors() {
        let mut mem = VisualMemory::new(30_000);
        mem.index_segment(SegmentId::new("v0"), r(0, 30_000), vec![3.0, 4.0])
            .unwrap();
        assert_eq!(mem.features()[0].vector, vec![0.6, 0.8]);
    }

    #[test]
    fn index_rejects_zero_and_mismatched_vectors() {
        let mut mem = VisualMemory::new(30_000);
        assert!(matches!(
            mem.index_segment(SegmentId::new("v0"), r(0, 30_000), vec![0.0, 0.0]),
            Err(Error::DegenerateFeature)
        ));
        mem.index_segment(SegmentId::new("v0"), r(0, 30_000), vec![1.0, 0.0])
            .unwrap();
        assert!(matches!(
            mem.index_segment(SegmentId::new("v1"), r(30_000, 60_000), vec![1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn search_self_match_is_first_with_unit_similarity() {
        let mut mem = VisualMemory::new(30_000);
        mem.index_segment(SegmentId::new("v0"), r(0, 30_000), vec![1.0, 0.0])
            .unwrap();
        mem.index_segment(SegmentId::new("v1"), r(30_000, 60_000), vec![0.0, 1.0])
            .unwrap();
        let hits = mem.feature_search(&[1.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].0.as_str(), "v0");
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn search_orthogonal_query_breaks_ties_by_time() {
        let mut mem = VisualMemory::new(30_000);
        mem.index_segment(
            SegmentId::new("late"),
            r(30_000, 60_000),
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        mem.index_segment(SegmentId::new("early"), r(0, 30_000), vec![0.0, 1.0, 0.0])
            .unwrap();
        let hits = mem.feature_search(&[0.0, 0.0, 1.0], 2).unwrap();
        assert!(hits.iter().all(|(_, sim)| sim.abs() < 1e-12));
        assert_eq!(hits[0].0.as_str(), "early");
        assert_eq!(hits[1].0.as_str(), "late");
    }

    #[test]
    fn search_empty_index_is_empty() {
        let mem = VisualMemory::new(30_000);
        assert!(mem.feature_search(&[1.0], 3).unwrap().is_empty());
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let entries = [
            ("v2", 60_000u64, vec![0.0, 1.0]),
            ("v0", 0, vec![1.0, 0.0]),
            ("v1", 30_000, vec![0.5, 0.5]),
        ];
        let mut a = VisualMemory::new(30_000);
        for (id, start, v) in &entries {
            a.index_segment(SegmentId::new(*id), r(*start, start + 30_000), v.clone())
                .unwrap();
        }
        let mut b = VisualMemory::new(30_000);
        for (id, start, v) in entries.iter().rev() {
            b.index_segment(SegmentId::new(*id), r(*start, start + 30_000), v.clone())
                .unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn frames_stay_sorted_and_unique() {
        let mut mem = VisualMemory::new(30_000);
        mem.register_frame(2_000, "f2").unwrap();
        mem.register_frame(1_000, "f1").unwrap();
        assert!(mem.register_frame(2_000, "dup").is_err());
        let stamps: Vec<u64> = mem.frames().iter().map(|f| f.timestamp_ms).collect();
        assert_eq!(stamps, vec![1_000, 2_000]);
    }

    #[test]
    fn timestamp_fetch_point_query() {
        let mut mem = VisualMemory::new(30_000);
        for t in [0u64, 15_000, 30_000] {
            mem.register_frame(t, format!("f{t}")).unwrap();
        }
        let got = mem.timestamp_fetch(r(15_000, 15_001), 5);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].timestamp_ms, 15_000);
        assert!(mem.timestamp_fetch(r(100_000, 200_000), 5).is_empty());
    }

    #[test]
    fn subsample_formula_matches_worked_case() {
        assert_eq!(uniform_subsample_indices(100, 5), vec![0, 24, 49, 74, 99]);
        assert_eq!(uniform_subsample_indices(3, 5), vec![0, 1, 2]);
        assert_eq!(uniform_subsample_indices(10, 1), vec![0]);
        assert!(uniform_subsample_indices(0, 5).is_empty());
        assert!(uniform_subsample_indices(5, 0).is_empty());
    }
}
