use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::types::{ClipEmbeddings, LossResult, MarginParams, SegmentIndices};

use super::similarity::{accumulate_pair_grad, pair_similarity, row_norms};

/// Positive and negative clips of one answer segment, relative to its
/// center clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLabeling {
    pub positives: BTreeSet<usize>,
    pub negatives: BTreeSet<usize>,
    pub center: usize,
}

/// `min(threshold, base + length_scaling · (j_e − j_s) / T)`.
pub fn dynamic_margin(seg: &SegmentIndices, params: &MarginParams) -> f64 {
    margin_for_length(seg.normalized_length(), params)
}

/// The margin for a given normalized segment length.
pub fn margin_for_length(normalized_length: f64, params: &MarginParams) -> f64 {
    params
        .threshold
        .min(params.base + params.length_scaling * normalized_length)
}

/// Positives are the clips within `window` of the start, center and end
/// clips; negatives are all clips strictly outside `[j_s − window, j_e + window]`.
pub fn label_boundary_clips(seg: &SegmentIndices, window: usize) -> Result<BoundaryLabeling> {
    let last = seg.clips() - 1;
    let center = (seg.start() + seg.end()) / 2;
    let around = |anchor: usize| anchor.saturating_sub(window)..=(anchor + window).min(last);
    let positives: BTreeSet<usize> = around(seg.start())
        .chain(around(center))
        .chain(around(seg.end()))
        .collect();
    let lo = seg.start().saturating_sub(window);
    let hi = seg.end() + window;
    let negatives: BTreeSet<usize> = (0..=last).filter(|&i| i < lo || i > hi).collect();
    if negatives.is_empty() {
        return Err(Error::NoNegativeClips);
    }
    Ok(BoundaryLabeling {
        positives,
        negatives,
        center,
    })
}

/// Margin ranking loss `max(0, s_neg − s_pos + δ)` on mean similarities to
/// the center clip. At the kink the zero branch is taken.
pub fn boundary_loss(
    emb: &ClipEmbeddings,
    seg: &SegmentIndices,
    labeling: &BoundaryLabeling,
    params: &MarginParams,
) -> Result<LossResult> {
    let clips = emb.clips();
    if seg.clips() != clips {
        return Err(Error::ShapeMismatch {
            expected: format!("{} clips", seg.clips()),
            found: format!("{clips} clips"),
        });
    }
    if labeling.negatives.is_empty() {
        return Err(Error::NoNegativeClips);
    }
    if labeling.positives.is_empty() {
        return Err(Error::InvalidParameter {
            name: "positive clip count",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    if let Some(&index) = labeling
        .positives
        .iter()
        .chain(&labeling.negatives)
        .chain(std::iter::once(&labeling.center))
        .find(|&&i| i >= clips)
    {
        return Err(Error::ClipOutOfRange { index, clips });
    }
    let norms = row_norms(emb)?;
    let c = labeling.center;
    let mean_sim = |set: &BTreeSet<usize>| {
        set.iter().map(|&i| pair_similarity(emb, &norms, c, i)).sum::<f64>() / set.len() as f64
    };
    let s_pos = mean_sim(&labeling.positives);
    let s_neg = mean_sim(&labeling.negatives);
    let hinge = s_neg - s_pos + dynamic_margin(seg, params);

    let mut result = LossResult::zero(clips * emb.dim());
    if hinge > 0.0 {
        result.value = hinge;
        let wp = -1.0 / labeling.positives.len() as f64;
        let wn = 1.0 / labeling.negatives.len() as f64;
        for &i in &labeling.positives {
            accumulate_pair_grad(emb, &norms, c, i, wp, &mut result.grad);
        }
        for &i in &labeling.negatives {
            accumulate_pair_grad(emb, &norms, c, i, wn, &mut result.grad);
        }
    }
    Ok(result)
}

/// Boundary loss averaged over several answer segments of one video.
pub fn boundary_loss_multi(
    emb: &ClipEmbeddings,
    segments: &[SegmentIndices],
    window: usize,
    params: &MarginParams,
) -> Result<LossResult> {
    if segments.is_empty() {
        return Err(Error::EmptySegments);
    }
    let mut total = LossResult::zero(emb.clips() * emb.dim());
    let scale = 1.0 / segments.len() as f64;
    for seg in segments {
        let labeling = label_boundary_clips(seg, window)?;
        let r = boundary_loss(emb, seg, &labeling, params)?;
        total.value += scale * r.value;
        for (g, d) in total.grad.iter_mut().zip(&r.grad) {
            *g += scale * d;
        }
    }
    Ok(total)
}
