use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::data::ToyDataset;
use super::objective::{query_objective, ObjectiveConfig};
use crate::error::{Error, Result};
use crate::losses::LossComponents;
use crate::types::ClipEmbeddings;

/// Linear projection `z = Wᵀx` from raw clip features to embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    raw_dim: usize,
    embed_dim: usize,
    /// Row-major `raw_dim × embed_dim`.
    weights: Vec<f64>,
}

impl LinearModel {
    /// Gaussian initialization with variance `1 / raw_dim`.
    pub fn random(raw_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / (raw_dim as f64).sqrt()).expect("positive sigma");
        LinearModel {
            raw_dim,
            embed_dim,
            weights: (0..raw_dim * embed_dim).map(|_| normal.sample(&mut rng)).collect(),
        }
    }

    pub fn from_weights(raw_dim: usize, embed_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != raw_dim * embed_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{raw_dim}x{embed_dim}"),
                found: weights.len().to_string(),
            });
        }
        Ok(LinearModel {
            raw_dim,
            embed_dim,
            weights,
        })
    }

    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn project(&self, features: &ClipEmbeddings) -> Result<ClipEmbeddings> {
        if features.dim() != self.raw_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("feature dim {}", self.raw_dim),
                found: features.dim().to_string(),
            });
        }
        let d = self.embed_dim;
        let mut out = vec![0.0; features.clips() * d];
        for (x, z) in features.rows().zip(out.chunks_mut(d)) {
            for (xr, wrow) in x.iter().zip(self.weights.chunks(d)) {
                for (zk, wk) in z.iter_mut().zip(wrow) {
                    *zk += xr * wk;
                }
            }
        }
        ClipEmbeddings::new(features.clips(), d, out)
    }

    /// `∂L/∂W = Σ_i x_i (∂L/∂z_i)ᵀ`, accumulated with a scale factor.
    fn accumulate_grad(&self, features: &ClipEmbeddings, dz: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.embed_dim;
        for (x, g) in features.rows().zip(dz.chunks(d)) {
            for (xr, orow) in x.iter().zip(out.chunks_mut(d)) {
                for (o, gk) in orow.iter_mut().zip(g) {
                    *o += scale * xr * gk;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub steps: usize,
    pub learning_rate: f64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveConfig::default(),
            steps: 200,
            learning_rate: 0.3,
            init_seed: 0,
        }
    }
}

/// Dataset means at one step, measured before that step's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub components: LossComponents,
    pub total: f64,
    pub pos_neg_gap: f64,
    pub boundary_error: f64,
}

/// Mean objective and `∂/∂W` over every query, in dataset order.
pub fn dataset_objective(
    model: &LinearModel,
    data: &ToyDataset,
    cfg: &ObjectiveConfig,
) -> Result<(TraceRow, Vec<f64>)> {
    let n = data.queries.len() as f64;
    let mut grad = vec![0.0; model.weights.len()];
    let mut row = TraceRow {
        step: 0,
        components: LossComponents::default(),
        total: 0.0,
        pos_neg_gap: 0.0,
        boundary_error: 0.0,
    };
    for q in &data.queries {
        let z = model.project(&q.features)?;
        let obj = query_objective(&z, &q.ground_truth, cfg)?;
        row.components.basic += obj.components.basic / n;
        row.components.clip += obj.components.clip / n;
        row.components.boundary += obj.components.boundary / n;
        row.components.aux += obj.components.aux / n;
        row.total += obj.total / n;
        row.pos_neg_gap += obj.pos_neg_gap / n;
        row.boundary_error += obj.boundary_error / n;
        model.accumulate_grad(&q.features, &obj.grad, 1.0 / n, &mut grad);
    }
    Ok((row, grad))
}

/// Full-batch gradient descent on the projection.
pub fn train(data: &ToyDataset, cfg: &TrainConfig) -> Result<(LinearModel, Vec<TraceRow>)> {
    let model = LinearModel::random(data.spec.raw_dim, data.spec.embed_dim, cfg.init_seed);
    train_from(model, data, cfg)
}

/// Like [`train`], starting from a given model.
pub fn train_from(mut model: LinearModel, data: &ToyDataset, cfg: &TrainConfig) -> Result<(LinearModel, Vec<TraceRow>)> {
    cfg.objective.validate()?;
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "learning_rate",
            value: cfg.learning_rate,
            reason: "must be finite and >= 0",
        });
    }
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (mut row, grad) = dataset_objective(&model, data, &cfg.objective)?;
        if !row.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        row.step = step;
        trace.push(row);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
    }
    Ok((model, trace))
}
