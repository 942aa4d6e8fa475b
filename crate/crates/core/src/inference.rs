//! Turning per-clip outputs into ranked prediction windows.

use crate::error::{Error, Result};
use crate::metrics::{iou, rank_predictions};
use crate::types::{PredictionWindow, Segment};

pub const DEFAULT_NMS_THRESHOLD: f64 = 0.7;
pub const DEFAULT_MAX_KEEP: usize = 10;

/// Per-clip saliency and boundary offsets (seconds, relative to the clip
/// center; start offsets are usually negative).
#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutputs {
    saliency: Vec<f64>,
    start_offset: Vec<f64>,
    end_offset: Vec<f64>,
}

impl ClipOutputs {
    pub fn new(saliency: Vec<f64>, start_offset: Vec<f64>, end_offset: Vec<f64>) -> Result<Self> {
        let t = saliency.len();
        for (name, v) in [("start_offset", &start_offset), ("end_offset", &end_offset)] {
            if v.len() != t {
                return Err(Error::ShapeMismatch {
                    expected: format!("{t} {name} entries"),
                    found: v.len().to_string(),
                });
            }
        }
        for (what, v) in [
            ("saliency", &saliency),
            ("start offset", &start_offset),
            ("end offset", &end_offset),
        ] {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what, index });
            }
        }
        Ok(ClipOutputs {
            saliency,
            start_offset,
            end_offset,
        })
    }

    pub fn clips(&self) -> usize {
        self.saliency.len()
    }

    pub fn saliency(&self) -> &[f64] {
        &self.saliency
    }
}

/// Windows assembled from clip outputs plus the number of degenerate ones
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub windows: Vec<PredictionWindow>,
    pub dropped: usize,
}

/// One window per clip: `[c_i + start_offset_i, c_i + end_offset_i]` with
/// `c_i = (i + 0.5) · duration / T`, clamped to `[0, duration]`.
pub fn assemble_windows(outputs: &ClipOutputs, duration: f64) -> Result<Assembled> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter {
            name: "duration",
            value: duration,
            reason: "must be finite and > 0",
        });
    }
    let clip_len = duration / outputs.clips().max(1) as f64;
    let mut windows = Vec::with_capacity(outputs.clips());
    let mut dropped = 0;
    for i in 0..outputs.clips() {
        let center = (i as f64 + 0.5) * clip_len;
        let start = (center + outputs.start_offset[i]).clamp(0.0, duration);
        let end = (center + outputs.end_offset[i]).clamp(0.0, duration);
        match Segment::new(start, end) {
            Ok(segment) => windows.push(PredictionWindow {
                segment,
                score: outputs.saliency[i],
            }),
            Err(_) => dropped += 1,
        }
    }
    Ok(Assembled { windows, dropped })
}

/// Greedy non-maximum suppression on temporal windows.
pub fn nms_1d(
    windows: &[PredictionWindow],
    iou_threshold: f64,
    max_keep: usize,
) -> Result<Vec<PredictionWindow>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "iou_threshold",
            value: iou_threshold,
            reason: "must lie in (0, 1]",
        });
    }
    let mut remaining = rank_predictions(windows);
    let mut kept = Vec::new();
    while !remaining.is_empty() && kept.len() < max_keep {
        let best = remaining.remove(0);
        remaining.retain(|w| iou(&w.segment, &best.segment) < iou_threshold);
        kept.push(best);
    }
    Ok(kept)
}
