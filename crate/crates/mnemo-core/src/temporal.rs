//! Time primitives: millisecond ranges, stream segmentation, temporal IoU,
//! and the `DAY X HH:MM:SS` clock format used by egocentric streams.
//!
//! All arithmetic is integer milliseconds from the stream origin; wall-clock
//! labels are converted at the ingestion boundary and never drift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MS_PER_DAY: u64 = 24 * 3600 * 1000;

/// Half-open interval `[start_ms, end_ms)` in milliseconds from stream origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeRange {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl TimeRange {
    pub fn new(start_ms: u64, end_ms: u64) -> Result<Self> {
        if start_ms >= end_ms {
            return Err(Error::invalid(format!(
                "time range requires start < end, got [{start_ms}, {end_ms})"
            )));
        }
        Ok(TimeRange { start_ms, end_ms })
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn contains(&self, t_ms: u64) -> bool {
        t_ms >= self.start_ms && t_ms < self.end_ms
    }

    pub fn overlaps(&self, other: &TimeRange) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }

    /// Compact clock rendering, e.g. `DAY2 18:34:01-18:34:29`
    /// (end day omitted when both ends fall on the same day).
    pub fn format_clock(&self) -> String {
        let start = format_day_clock(self.start_ms);
        if self.start_ms / MS_PER_DAY == self.end_ms / MS_PER_DAY {
            let end = format_day_clock(self.end_ms);
            let clock_only = end.split_once(' ').map(|(_, c)| c).unwrap_or(&end);
            format!("{start}-{clock_only}")
        } else {
            format!("{start}-{}", format_day_clock(self.end_ms))
        }
    }
}

/// Identifier of a stored segment, unique within one memory store.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub String);

impl SegmentId {
    pub fn new(id: impl Into<String>) -> Self {
        SegmentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for SegmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A captioned slice of the stream at one timescale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub range: TimeRange,
    /// The timescale this segment belongs to; its duration never exceeds this
    /// (the final segment of a stream may be shorter).
    pub scale_ms: u64,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

impl Segment {
    pub fn new(
        id: impl Into<String>,
        range: TimeRange,
        scale_ms: u64,
        caption: impl Into<String>,
        transcript: Option<String>,
    ) -> Result<Self> {
        if scale_ms == 0 {
            return Err(Error::invalid("segment scale must be positive"));
        }
        if range.duration_ms() > scale_ms {
            return Err(Error::invalid(format!(
                "segment [{}, {}) is longer than its scale {scale_ms} ms",
                range.start_ms, range.end_ms
            )));
        }
        Ok(Segment {
            id: SegmentId::new(id),
            range,
            scale_ms,
            caption: caption.into(),
            transcript,
        })
    }
}

/// The ordered timescales an engine instance operates on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimescaleConfig {
    /// Episodic scales, strictly increasing. The first entry is the fine
    /// (unit) scale from which coarser captions are composed.
    pub scales_ms: Vec<u64>,
    /// Window length for semantic triplet extraction and consolidation.
    pub semantic_scale_ms: u64,
    /// Fixed segment length of the visual feature index.
    pub visual_scale_ms: u64,
}

impl TimescaleConfig {
    pub fn new(scales_ms: Vec<u64>, semantic_scale_ms: u64, visual_scale_ms: u64) -> Result<Self> {
        if scales_ms.is_empty() {
            return Err(Error::invalid("at least one episodic timescale required"));
        }
        if scales_ms.contains(&0) {
            return Err(Error::invalid("timescales must be positive"));
        }
        if !scales_ms.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("timescales must be strictly increasing"));
        }
        if semantic_scale_ms == 0 || visual_scale_ms == 0 {
            return Err(Error::invalid(
                "semantic and visual scales must be positive",
            ));
        }
        Ok(TimescaleConfig {
            scales_ms,
            semantic_scale_ms,
            visual_scale_ms,
        })
    }

    pub fn fine_scale_ms(&self) -> u64 {
        self.scales_ms[0]
    }

    /// The scale one step finer than `scale_ms`, if `scale_ms` is a configured
    /// non-fine scale.
    pub fn finer_scale(&self, scale_ms: u64) -> Option<u64> {
        self.scales_ms
            .iter()
            .position(|&s| s == scale_ms)
            .filter(|&i| i > 0)
            .map(|i| self.scales_ms[i - 1])
    }
}

/// Default configuration for week-long egocentric streams: 30 s / 3 min /
/// 10 min / 1 h episodic scales, 10 min semantic windows, 30 s visual segments.
impl Default for TimescaleConfig {
    fn default() -> Self {
        TimescaleConfig {
            scales_ms: vec![30_000, 180_000, 600_000, 3_600_000],
            semantic_scale_ms: 600_000,
            visual_scale_ms: 30_000,
        }
    }
}

/// Partition `[0, total_ms)` into consecutive ranges of length `scale_ms`;
/// the last range may be shorter. The partial tail is kept, not dropped.
pub fn partition_timeline(total_ms: u64, scale_ms: u64) -> Result<Vec<TimeRange>> {
    if total_ms == 0 || scale_ms == 0 {
        return Err(Error::invalid(
            "partition_timeline requires positive total and scale",
        ));
    }
    let mut ranges = Vec::with_capacity(total_ms.div_ceil(scale_ms) as usize);
    let mut start = 0;
    while start < total_ms {
        let end = (start + scale_ms).min(total_ms);
        ranges.push(TimeRange {
            start_ms: start,
            end_ms: end,
        });
        start = end;
    }
    Ok(ranges)
}

/// Coalesce a list of ranges into disjoint, sorted, maximal ranges.
pub fn coalesce(ranges: &[TimeRange]) -> Vec<TimeRange> {
    let mut sorted: Vec<TimeRange> = ranges.to_vec();
    sorted.sort();
    let mut merged: Vec<TimeRange> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match merged.last_mut() {
            Some(last) if r.start_ms <= last.end_ms => {
                last.end_ms = last.end_ms.max(r.end_ms);
            }
            _ => merged.push(r),
        }
    }
    merged
}

fn total_duration(coalesced: &[TimeRange]) -> u64 {
    coalesced.iter().map(TimeRange::duration_ms).sum()
}

fn intersection_duration(a: &[TimeRange], b: &[TimeRange]) -> u64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0u64;
    while i < a.len() && j < b.len() {
        let lo = a[i].start_ms.max(b[j].start_ms);
        let hi = a[i].end_ms.min(b[j].end_ms);
        if lo < hi {
            acc += hi - lo;
        }
        if a[i].end_ms <= b[j].end_ms {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc
}

/// Temporal intersection-over-union between two interval sets.
///
/// Both sides are coalesced first, so overlapping ranges within one list are
/// counted once (set semantics). An empty `retrieved` scores 0; an empty
/// `truth` is an argument error.
pub fn tiou(retrieved: &[TimeRange], truth: &[TimeRange]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("tiou requires a non-empty truth set"));
    }
    if retrieved.is_empty() {
        return Ok(0.0);
    }
    let a = coalesce(retrieved);
    let b = coalesce(truth);
    let inter = intersection_duration(&a, &b);
    let union = total_duration(&a) + total_duration(&b) - inter;
    debug_assert!(union > 0);
    Ok(inter as f64 / union as f64)
}

/// Format a stream offset as `DAYn HH:MM:SS` (days are 1-based).
pub fn format_day_clock(ms: u64) -> String {
    let day = ms / MS_PER_DAY + 1;
    let rem_s = (ms % MS_PER_DAY) / 1000;
    let (h, m, s) = (rem_s / 3600, (rem_s % 3600) / 60, rem_s % 60);
    format!("DAY{day} {h:02}:{m:02}:{s:02}")
}

fn clock_to_ms(day: u64, h: u64, m: u64, s: u64) -> Result<u64> {
    if day == 0 {
        return Err(Error::invalid("days are 1-based in DAY X HH:MM:SS"));
    }
    if h >= 24 || m >= 60 || s >= 60 {
        return Err(Error::invalid(format!("clock out of range: {h}:{m}:{s}")));
    }
    // These strings can come straight from model output; absurd day
    // numbers must error, not overflow.
    (day - 1)
        .checked_mul(MS_PER_DAY)
        .and_then(|base| base.checked_add((h * 3600 + m * 60 + s) * 1000))
        .ok_or_else(|| Error::invalid(format!("day {day} is out of range")))
}

fn capture_num(caps: &regex::Captures<'_>, i: usize) -> Result<u64> {
    caps[i]
        .parse::<u64>()
        .map_err(|_| Error::invalid(format!("numeric field {:?} out of range", &caps[i])))
}

/// Parse `DAY X HH:MM:SS` (space after DAY optional) to a stream offset.
pub fn parse_day_clock(text: &str) -> Result<u64> {
    let re = day_clock_re();
    let caps = re
        .captures(text.trim())
        .ok_or_else(|| Error::invalid(format!("not a DAY X HH:MM:SS timestamp: {text:?}")))?;
    clock_to_ms(
        capture_num(&caps, 1)?,
        capture_num(&caps, 2)?,
        capture_num(&caps, 3)?,
        capture_num(&caps, 4)?,
    )
}

/// Parse `DAY X HH:MM:SS - DAY Y HH:MM:SS`; the second `DAY Y` may be
/// omitted for same-day ranges (`DAY2 18:34:01-18:34:29`).
pub fn parse_day_clock_range(text: &str) -> Result<TimeRange> {
    let re = day_range_re();
    let caps = re
        .captures(text.trim())
        .ok_or_else(|| Error::invalid(format!("not a DAY X HH:MM:SS range: {text:?}")))?;
    let start_day = capture_num(&caps, 1)?;
    let start = clock_to_ms(
        start_day,
        capture_num(&caps, 2)?,
        capture_num(&caps, 3)?,
        capture_num(&caps, 4)?,
    )?;
    let end_day = match caps.get(5) {
        Some(_) => capture_num(&caps, 5)?,
        None => start_day,
    };
    let end = clock_to_ms(
        end_day,
        capture_num(&caps, 6)?,
        capture_num(&caps, 7)?,
        capture_num(&caps, 8)?,
    )?;
    TimeRange::new(start, end)
}

/// Whether `text` matches the timestamp-range grammar at all (used to route
/// visual queries between timestamp mode and feature mode).
pub fn is_day_clock_range(text: &str) -> bool {
    day_range_re().is_match(text.trim())
}

fn day_clock_re() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(r"^DAY\s*(\d+)\s+(\d{1,2}):(\d{2}):(\d{2})$").unwrap())
}

fn day_range_re() -> &'static regex::Regex {
    static RE: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        regex::Regex::new(
            r"^DAY\s*(\d+)\s+(\d{1,2}):(\d{2}):(\d{2})\s*-\s*(?:DAY\s*(\d+)\s+)?(\d{1,2}):(\d{2}):(\d{2})$",
        )
        .unwrap()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: u64, e: u64) -> TimeRange {
        TimeRange::new(s, e).unwrap()
    }

    #[test]
    fn partition_exact_division() {
        let parts = partition_timeline(60_000, 30_000).unwrap();
        assert_eq!(parts, vec![r(0, 30_000), r(30_000, 60_000)]);
    }

    #[test]
    fn partition_keeps_short_tail() {
        let parts = partition_timeline(70_000, 30_000).unwrap();
        assert_eq!(
            parts,
            vec![r(0, 30_000), r(30_000, 60_000), r(60_000, 70_000)]
        );
    }

    #[test]
    fn partition_day_long_stream_counts() {
        let day = 24 * 3600 * 1000;
        for (scale, expect) in [
            (30_000u64, 2880usize),
            (180_000, 480),
            (600_000, 144),
            (3_600_000, 24),
        ] {
            assert_eq!(partition_timeline(day, scale).unwrap().len(), expect);
        }
    }

    #[test]
    fn partition_rejects_non_positive() {
        assert!(partition_timeline(0, 30_000).is_err());
        assert!(partition_timeline(30_000, 0).is_err());
    }

    #[test]
    fn tiou_identical_and_disjoint() {
        assert_eq!(tiou(&[r(0, 30)], &[r(0, 30)]).unwrap(), 1.0);
        assert_eq!(tiou(&[r(0, 10)], &[r(20, 30)]).unwrap(), 0.0);
    }

    #[test]
    fn tiou_partial_overlap_is_exact_third() {
        let v = tiou(&[r(0, 30)], &[r(15, 45)]).unwrap();
        assert_eq!(v, 15.0 / 45.0);
    }

    #[test]
    fn tiou_empty_retrieved_is_zero_empty_truth_is_error() {
        assert_eq!(tiou(&[], &[r(0, 10)]).unwrap(), 0.0);
        assert!(tiou(&[r(0, 10)], &[]).is_err());
    }

    #[test]
    fn tiou_coalesces_overlapping_inputs() {
        // [0,20) ∪ [10,30) = [0,30); against [0,30) this is exact.
        assert_eq!(tiou(&[r(0, 20), r(10, 30)], &[r(0, 30)]).unwrap(), 1.0);
    }

    #[test]
    fn range_rejects_empty_and_inverted() {
        assert!(TimeRange::new(5, 5).is_err());
        assert!(TimeRange::new(10, 5).is_err());
    }

    #[test]
    fn day_clock_round_trip() {
        let ms = parse_day_clock("DAY2 18:34:01").unwrap();
        assert_eq!(ms, (86400 + 18 * 3600 + 34 * 60 + 1) * 1000);
        assert_eq!(format_day_clock(ms), "DAY2 18:34:01");
        assert_eq!(parse_day_clock("DAY 2 18:34:01").unwrap(), ms);
    }

    #[test]
    fn day_clock_range_variants() {
        let full = parse_day_clock_range("DAY 2 18:34:01 - DAY 2 18:34:29").unwrap();
        let compact = parse_day_clock_range("DAY2 18:34:01-18:34:29").unwrap();
        assert_eq!(full, compact);
        assert_eq!(full.duration_ms(), 28_000);
        assert!(is_day_clock_range("DAY1 00:00:00 - DAY2 00:00:00"));
        assert!(!is_day_clock_range("air conditioning"));
    }

    #[test]
    fn day_clock_range_rejects_inverted() {
        assert!(parse_day_clock_range("DAY2 18:34:29-18:34:01").is_err());
    }

    #[test]
    fn day_clock_rejects_absurd_values_without_panicking() {
        // Day numbers beyond u64 math must error, not overflow: these
        // strings can come straight from model output.
        assert!(parse_day_clock("DAY 99999999999999999999 00:00:00").is_err());
        assert!(parse_day_clock("DAY 300000000000000 00:00:00").is_err());
        assert!(parse_day_clock_range("DAY 99999999999999999999 00:00:00 - DAY 1 00:00:01").is_err());
        assert!(parse_day_clock("DAY 0 00:00:00").is_err());
        assert!(parse_day_clock("DAY 1 25:00:00").is_err());
    }

    #[test]
    fn clock_formatting_crosses_days() {
        let cross = r(86_400_000 - 1000, 86_400_000 + 1000);
        assert_eq!(cross.format_clock(), "DAY1 23:59:59-DAY2 00:00:01");
        assert_eq!(r(0, 30_000).format_clock(), "DAY1 00:00:00-00:00:30");
    }

    #[test]
    fn segment_validation() {
        assert!(Segment::new("s", r(0, 40_000), 30_000, "c", None).is_err());
        let tail = Segment::new("s", r(60_000, 70_000), 30_000, "c", None).unwrap();
        assert_eq!(tail.range.duration_ms(), 10_000);
    }

    #[test]
    fn timescale_config_validation() {
        assert!(TimescaleConfig::new(vec![], 1, 1).is_err());
        assert!(TimescaleConfig::new(vec![10, 10], 1, 1).is_err());
        assert!(TimescaleConfig::new(vec![20, 10], 1, 1).is_err());
        let c = TimescaleConfig::new(vec![10, 20, 40], 30, 10).unwrap();
        assert_eq!(c.finer_scale(20), Some(10));
        assert_eq!(c.finer_scale(10), None);
        assert_eq!(c.finer_scale(25), None);
    }
}
