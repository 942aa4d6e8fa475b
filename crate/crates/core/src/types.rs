//! Validated domain values shared by every other module.
//!
//! Time is measured in seconds unless a value is explicitly called
//! *normalized*, in which case it lives in `[0, 1]` relative to the video
//! duration. Clip indices are 0-based throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Query identifier, the `qid` of the JSONL formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueryId(pub u64);

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A non-empty time interval `[start, end]` with `0 <= start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    start: f64,
    end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidSegment { start, end, reason };
        if !start.is_finite() || !end.is_finite() {
            return Err(invalid("non-finite bound"));
        }
        if start < 0.0 {
            return Err(invalid("negative start"));
        }
        if start >= end {
            return Err(invalid("start ≥ end"));
        }
        Ok(Segment { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Rescales into `[0, 1]` coordinates of a video lasting `duration` seconds.
    pub fn normalized(&self, duration: f64) -> Result<Segment> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                value: duration,
                reason: "must be finite and > 0",
            });
        }
        Segment::new(self.start / duration, self.end / duration)
    }
}

/// Ground truth for one query: a video and its sorted answer segments.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    query_id: QueryId,
    video_id: String,
    duration: f64,
    segments: Vec<Segment>,
}

impl GroundTruthEntry {
    /// Validates and builds an entry; segments are sorted by start.
    ///
    /// Bound violations report the index in the input order, duplicates the
    /// index after sorting.
    pub fn new(
        query_id: QueryId,
        video_id: impl Into<String>,
        duration: f64,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                value: duration,
                reason: "must be finite and > 0",
            });
        }
        if segments.is_empty() {
            return Err(Error::EmptySegments);
        }
        for (index, seg) in segments.iter().enumerate() {
            if seg.end > duration {
                return Err(Error::SegmentExceedsDuration {
                    index,
                    start: seg.start,
                    end: seg.end,
                    duration,
                });
            }
        }
        let mut segments = segments;
        segments.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        for index in 1..segments.len() {
            if segments[index] == segments[index - 1] {
                return Err(Error::DuplicateSegment { index });
            }
        }
        Ok(GroundTruthEntry {
            query_id,
            video_id: video_id.into(),
            duration,
            segments,
        })
    }

    /// Builds an entry from raw `[start, end]` pairs, reporting the offending
    /// pair index on failure.
    pub fn from_windows(
        query_id: QueryId,
        video_id: impl Into<String>,
        duration: f64,
        windows: &[[f64; 2]],
    ) -> Result<Self> {
        let segments = windows
            .iter()
            .enumerate()
            .map(|(i, w)| Segment::new(w[0], w[1]).map_err(|e| e.at_segment(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(query_id, video_id, duration, segments)
    }

    /// Re-runs validation; a no-op on any entry that already exists.
    pub fn validate(self) -> Result<Self> {
        Self::new(self.query_id, self.video_id, self.duration, self.segments)
    }

    pub fn query_id(&self) -> QueryId {
        self.query_id
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn normalized_segments(&self) -> Vec<Segment> {
        self.segments
            .iter()
            .map(|s| {
                s.normalized(self.duration)
                    .expect("validated segment stays valid after normalization")
            })
            .collect()
    }
}

/// A `clips × dim` row-major matrix of clip embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEmbeddings {
    clips: usize,
    dim: usize,
    data: Vec<f64>,
}

impl ClipEmbeddings {
    pub fn new(clips: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if clips == 0 || dim == 0 {
            return Err(Error::ShapeMismatch {
                expected: "at least 1 clip and 1 dimension".into(),
                found: format!("{clips}x{dim}"),
            });
        }
        if data.len() != clips * dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values ({clips}x{dim})", clips * dim),
                found: data.len().to_string(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "embeddings",
                index,
            });
        }
        Ok(ClipEmbeddings { clips, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {dim}"),
                found: format!("row of length {}", bad.len()),
            });
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn clips(&self) -> usize {
        self.clips
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Inclusive clip-index span `[start, end]` of an answer segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentIndices {
    start: usize,
    end: usize,
    clips: usize,
}

impl SegmentIndices {
    pub fn new(start: usize, end: usize, clips: usize) -> Result<Self> {
        if end >= clips {
            return Err(Error::ClipOutOfRange { index: end, clips });
        }
        if start > end {
            return Err(Error::InvalidParameter {
                name: "start index",
                value: start as f64,
                reason: "must not exceed end index",
            });
        }
        Ok(SegmentIndices { start, end, clips })
    }

    /// Clips whose time span `[i/T, (i+1)/T]` overlaps the interior of a
    /// normalized segment. Bounds within `1e-9` clips of a clip edge snap to it.
    pub fn covering(segment: &Segment, clips: usize) -> Result<Self> {
        if clips == 0 {
            return Err(Error::TooFewClips(0));
        }
        const SNAP: f64 = 1e-9;
        let t = clips as f64;
        let last = clips - 1;
        let start = ((segment.start() * t + SNAP).floor() as usize).min(last);
        let end = ((segment.end() * t - SNAP).ceil() as usize)
            .saturating_sub(1)
            .clamp(start, last);
        Self::new(start, end, clips)
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn clips(&self) -> usize {
        self.clips
    }

    /// `(end - start) / T`.
    pub fn normalized_length(&self) -> f64 {
        (self.end - self.start) as f64 / self.clips as f64
    }
}

/// Parameters of the length-dependent hinge margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    /// Upper bound on the margin.
    pub threshold: f64,
    /// Margin of a single-clip segment.
    pub base: f64,
    /// Slope on the normalized segment length.
    pub length_scaling: f64,
}

impl Default for MarginParams {
    fn default() -> Self {
        MarginParams {
            threshold: 0.3,
            base: 0.1,
            length_scaling: 0.1,
        }
    }
}

impl MarginParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("threshold", self.threshold),
            ("base", self.base),
            ("length_scaling", self.length_scaling),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and > 0",
                });
            }
        }
        if self.base > self.threshold {
            return Err(Error::InvalidParameter {
                name: "base",
                value: self.base,
                reason: "must not exceed threshold",
            });
        }
        Ok(())
    }
}

/// Weights of the total objective and the hyperparameters of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_basic: f64,
    pub lambda_clip: f64,
    pub lambda_boun: f64,
    pub lambda_b_aux: f64,
    /// Auxiliary sub-weight on the start residual.
    pub lambda_s: f64,
    pub lambda_e: f64,
    pub lambda_c: f64,
    pub lambda_l: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Number of hard negatives kept.
    pub k: usize,
    /// SmoothL1 transition point.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_basic: 1.0,
            lambda_clip: 3.0,
            lambda_boun: 3.0,
            lambda_b_aux: 2.0,
            lambda_s: 1.0,
            lambda_e: 1.0,
            lambda_c: 0.5,
            lambda_l: 0.5,
            tau: 0.07,
            k: 20,
            beta: 1.0,
        }
    }
}

impl LossWeights {
    /// All four sub-weights of the auxiliary loss set to `1`.
    pub fn with_unit_aux(self) -> Self {
        LossWeights {
            lambda_s: 1.0,
            lambda_e: 1.0,
            lambda_c: 1.0,
            lambda_l: 1.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("lambda_basic", self.lambda_basic),
            ("lambda_clip", self.lambda_clip),
            ("lambda_boun", self.lambda_boun),
            ("lambda_b_aux", self.lambda_b_aux),
            ("lambda_s", self.lambda_s),
            ("lambda_e", self.lambda_e),
            ("lambda_c", self.lambda_c),
            ("lambda_l", self.lambda_l),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and >= 0",
                });
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: self.tau,
                reason: "must be finite and > 0",
            });
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must be finite and > 0",
            });
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        Ok(())
    }
}

/// A scored candidate window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionWindow {
    pub segment: Segment,
    pub score: f64,
}

impl PredictionWindow {
    pub fn new(segment: Segment, score: f64) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::NonFinite {
                what: "prediction score",
                index: 0,
            });
        }
        Ok(PredictionWindow { segment, score })
    }
}

/// Scalar loss and its gradient, flattened in the layout of the
/// differentiable input (row-major `T×D` for embeddings, `[start, end]` for
/// timestamps).
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossResult {
    pub fn zero(len: usize) -> Self {
        LossResult {
            value: 0.0,
            grad: vec![0.0; len],
        }
    }
}
