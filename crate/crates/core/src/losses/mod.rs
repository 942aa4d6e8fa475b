//! Forward values and analytic gradients of the training objective.
//!
//! * [`clip_similarity_loss`]: contrastive loss over clip pairs, gradient `T×D`.
//! * [`boundary_loss`]: margin ranking loss around the segment center, gradient `T×D`.
//! * [`aux_boundary_loss`]: SmoothL1 on start, end, center and length, gradient over `(start, end)`.
//! * [`total_loss`]: weighted sum with a caller-supplied basic term.

mod aux;
mod boundary;
mod clip;
mod similarity;

pub use aux::{aux_boundary_loss, aux_boundary_loss_multi, smooth_l1};
pub use boundary::{
    boundary_loss, boundary_loss_multi, dynamic_margin, label_boundary_clips, margin_for_length,
    BoundaryLabeling,
};
pub use clip::clip_similarity_loss;
pub(crate) use similarity::{accumulate_pair_grad, pair_similarity, row_norms};
pub use similarity::{cosine_similarity, similarity_matrix, SimilarityMatrix};

use serde::Serialize;

use crate::types::LossWeights;

/// The four terms of the total objective, unweighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossComponents {
    pub basic: f64,
    pub clip: f64,
    pub boundary: f64,
    pub aux: f64,
}

impl LossComponents {
    pub fn total(&self, weights: &LossWeights) -> f64 {
        total_loss(self.basic, self.clip, self.boundary, self.aux, weights)
    }
}

pub fn total_loss(basic: f64, clip: f64, boun: f64, b_aux: f64, weights: &LossWeights) -> f64 {
    weights.lambda_basic * basic
        + weights.lambda_clip * clip
        + weights.lambda_boun * boun
        + weights.lambda_b_aux * b_aux
}
