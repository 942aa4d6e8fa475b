use crate::error::{Error, Result};
use crate::metrics::interval_iou;
use crate::types::{LossResult, LossWeights, Segment};

/// SmoothL1 of the residual `x − y` and its derivative in `x`.
///
/// Quadratic `d²/(2β)` for `|d| < β`, linear `|d| − β/2` beyond.
pub fn smooth_l1(x: f64, y: f64, beta: f64) -> (f64, f64) {
    let d = x - y;
    if d.abs() < beta {
        (0.5 * d * d / beta, d / beta)
    } else {
        (d.abs() - 0.5 * beta, d.signum())
    }
}

/// Weighted SmoothL1 on start, end, center and length of a predicted
/// `[start, end]` pair against one answer segment.
///
/// The prediction is a raw pair rather than a [`Segment`] so that inverted
/// predictions can still be penalized during training. The gradient is over
/// `(start, end)`.
pub fn aux_boundary_loss(pred: [f64; 2], gt: &Segment, weights: &LossWeights) -> Result<LossResult> {
    if let Some(index) = pred.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "predicted boundary",
            index,
        });
    }
    let [ps, pe] = pred;
    let beta = weights.beta;
    let (vs, gs) = smooth_l1(ps, gt.start(), beta);
    let (ve, ge) = smooth_l1(pe, gt.end(), beta);
    let (vc, gc) = smooth_l1(0.5 * (ps + pe), gt.center(), beta);
    let (vl, gl) = smooth_l1(pe - ps, gt.length(), beta);

    let value = weights.lambda_s * vs
        + weights.lambda_e * ve
        + weights.lambda_c * vc
        + weights.lambda_l * vl;
    // ∂center/∂start = ∂center/∂end = ½, ∂length/∂start = −1, ∂length/∂end = 1.
    let d_start = weights.lambda_s * gs + 0.5 * weights.lambda_c * gc - weights.lambda_l * gl;
    let d_end = weights.lambda_e * ge + 0.5 * weights.lambda_c * gc + weights.lambda_l * gl;
    Ok(LossResult {
        value,
        grad: vec![d_start, d_end],
    })
}

/// Auxiliary loss against the answer segment of highest IoU with the
/// prediction, the earliest one on ties.
pub fn aux_boundary_loss_multi(
    pred: [f64; 2],
    gts: &[Segment],
    weights: &LossWeights,
) -> Result<LossResult> {
    let best = best_match(pred, gts).ok_or(Error::EmptySegments)?;
    aux_boundary_loss(pred, &gts[best], weights)
}

pub(crate) fn best_match(pred: [f64; 2], gts: &[Segment]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, gt) in gts.iter().enumerate() {
        let iou = interval_iou(pred[0], pred[1], gt.start(), gt.end());
        if best.is_none_or(|(_, b)| iou > b) {
            best = Some((i, iou));
        }
    }
    best.map(|(i, _)| i)
}
