use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{
    accumulate_pair_grad, aux_boundary_loss_multi, boundary_loss_multi, clip_similarity_loss, pair_similarity,
    row_norms, similarity_matrix, LossComponents,
};
use crate::pairset::{build_pair_sets, mine_hard_negatives, CrossSegmentPolicy};
use crate::types::{ClipEmbeddings, GroundTruthEntry, LossWeights, MarginParams, Segment, SegmentIndices};

/// Everything the per-query objective needs besides the embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub weights: LossWeights,
    pub margin: MarginParams,
    /// Radius of the boundary-loss positive windows, in clips.
    pub window: usize,
    pub policy: CrossSegmentPolicy,
    /// Saliency logit is `gain · (mean similarity to segment centers − bias)`.
    pub saliency_gain: f64,
    pub saliency_bias: f64,
    /// Extra clips on each side of a segment seen by the soft boundary head.
    pub aux_context: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            weights: LossWeights::default(),
            margin: MarginParams::default(),
            window: 1,
            policy: CrossSegmentPolicy::Excluded,
            saliency_gain: 10.0,
            saliency_bias: 0.5,
            aux_context: 2,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.margin.validate()?;
        for (name, value) in [("saliency_gain", self.saliency_gain), ("saliency_bias", self.saliency_bias)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }
}

/// Loss terms, weighted total and `∂total/∂Z` for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryObjective {
    pub components: LossComponents,
    pub total: f64,
    /// Flat `T×D`, same layout as the embeddings.
    pub grad: Vec<f64>,
    /// Mean positive-pair similarity minus mean negative-pair similarity.
    pub pos_neg_gap: f64,
    /// Mean absolute start/end error of the soft boundary head, normalized time.
    pub boundary_error: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Normalized segments shifted by half a clip, so that the pair-set rule
/// `start ≤ (i+1)/T ≤ end` tests clip centers.
fn center_aligned(segments: &[Segment], clips: usize) -> Result<Vec<Segment>> {
    let half = 0.5 / clips as f64;
    segments
        .iter()
        .map(|s| Segment::new(s.start() + half, (s.end() + half).min(1.0)))
        .collect()
}

/// Soft saliency over clips: sigmoid of scaled mean similarity to the
/// center clip of every answer segment.
struct Saliency {
    centers: Vec<usize>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

fn saliency(emb: &ClipEmbeddings, norms: &[f64], indices: &[SegmentIndices], cfg: &ObjectiveConfig) -> Saliency {
    let centers: Vec<usize> = indices.iter().map(|s| (s.start() + s.end()) / 2).collect();
    let logits: Vec<f64> = (0..emb.clips())
        .map(|i| {
            let mean = centers.iter().map(|&c| pair_similarity(emb, norms, c, i)).sum::<f64>() / centers.len() as f64;
            cfg.saliency_gain * (mean - cfg.saliency_bias)
        })
        .collect();
    let probs = logits.iter().map(|&a| sigmoid(a)).collect();
    Saliency { centers, logits, probs }
}

/// Computes the weighted objective of one query and its gradient with
/// respect to the projected clip embeddings.
///
/// Terms that are undefined for this query (no positive pair, no clip
/// outside the boundary windows) contribute zero.
pub fn query_objective(emb: &ClipEmbeddings, gt: &GroundTruthEntry, cfg: &ObjectiveConfig) -> Result<QueryObjective> {
    let t = emb.clips();
    let len = t * emb.dim();
    let w = &cfg.weights;
    let norms = row_norms(emb)?;
    let normalized = gt.normalized_segments();
    let indices = normalized
        .iter()
        .map(|s| SegmentIndices::covering(s, t))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; len];
    let mut components = LossComponents::default();

    let sims = similarity_matrix(emb)?;
    let pairs = build_pair_sets(t, &center_aligned(&normalized, t)?, cfg.policy)?;
    let mean_sim = |set: &[(usize, usize)]| {
        if set.is_empty() {
            0.0
        } else {
            set.iter().map(|&(i, j)| sims.get(i, j)).sum::<f64>() / set.len() as f64
        }
    };
    let pos_neg_gap = mean_sim(&pairs.positives) - mean_sim(&pairs.negatives);
    let mined = mine_hard_negatives(&sims, pairs, w.k);
    match clip_similarity_loss(emb, &mined, w.tau) {
        Ok(r) => {
            components.clip = r.value;
            axpy(w.lambda_clip, &r.grad, &mut grad);
        }
        Err(Error::NoPositivePairs) => {}
        Err(e) => return Err(e),
    }

    match boundary_loss_multi(emb, &indices, cfg.window, &cfg.margin) {
        Ok(r) => {
            components.boundary = r.value;
            axpy(w.lambda_boun, &r.grad, &mut grad);
        }
        Err(Error::NoNegativeClips) => {}
        Err(e) => return Err(e),
    }

    let sal = saliency(emb, &norms, &indices, cfg);
    let tf = t as f64;
    let center_of = |i: usize| (i as f64 + 0.5) / tf;
    let labels: Vec<f64> = (0..t)
        .map(|i| {
            let u = center_of(i);
            f64::from(u8::from(normalized.iter().any(|s| s.start() <= u && u <= s.end())))
        })
        .collect();
    // dL/da_i accumulated from the basic and auxiliary terms.
    let mut d_logit = vec![0.0; t];
    for i in 0..t {
        let (a, y) = (sal.logits[i], labels[i]);
        components.basic += (softplus(a) - y * a) / tf;
        d_logit[i] += w.lambda_basic * (sal.probs[i] - y) / tf;
    }

    let mut boundary_error = 0.0;
    let n_seg = indices.len() as f64;
    for idx in &indices {
        let lo = idx.start().saturating_sub(cfg.aux_context);
        let hi = (idx.end() + cfg.aux_context).min(t - 1);
        let mass: f64 = sal.probs[lo..=hi].iter().sum();
        let length = mass / tf;
        let center = (lo..=hi).map(|i| sal.probs[i] * center_of(i)).sum::<f64>() / mass;
        let pred = [center - 0.5 * length, center + 0.5 * length];
        let r = aux_boundary_loss_multi(pred, &normalized, w)?;
        components.aux += r.value / n_seg;
        let nearest = normalized
            .iter()
            .min_by(|a, b| {
                let da = (a.start() - pred[0]).abs() + (a.end() - pred[1]).abs();
                let db = (b.start() - pred[0]).abs() + (b.end() - pred[1]).abs();
                da.total_cmp(&db)
            })
            .expect("non-empty segments");
        boundary_error += 0.5 * ((nearest.start() - pred[0]).abs() + (nearest.end() - pred[1]).abs()) / n_seg;

        let (gs, ge) = (r.grad[0] / n_seg, r.grad[1] / n_seg);
        let d_center = gs + ge;
        let d_length = 0.5 * (ge - gs);
        for i in lo..=hi {
            let dp = d_length / tf + d_center * (center_of(i) - center) / mass;
            let p = sal.probs[i];
            d_logit[i] += w.lambda_b_aux * dp * p * (1.0 - p);
        }
    }

    let per_center = cfg.saliency_gain / sal.centers.len() as f64;
    for (i, &dl) in d_logit.iter().enumerate() {
        for &c in &sal.centers {
            accumulate_pair_grad(emb, &norms, c, i, dl * per_center, &mut grad);
        }
    }

    let total = components.total(w);
    Ok(QueryObjective {
        components,
        total,
        grad,
        pos_neg_gap,
        boundary_error,
    })
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
