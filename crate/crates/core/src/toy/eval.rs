use serde::{Deserialize, Serialize};

use super::data::{ToyDataset, ToyQuery};
use super::train::LinearModel;
use crate::error::Result;
use crate::inference::{assemble_windows, nms_1d, ClipOutputs, DEFAULT_MAX_KEEP, DEFAULT_NMS_THRESHOLD};
use crate::metrics::{evaluate, EvalResult, Predictions, DEFAULT_PREDICTION_CAP};
use crate::types::{ClipEmbeddings, PredictionWindow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Saliency at or above this marks a clip as foreground.
    pub threshold: f64,
    /// Replace heuristic offsets with the ground-truth segment under each clip.
    pub oracle_offsets: bool,
    pub nms_threshold: f64,
    pub max_keep: usize,
    pub cap: usize,
}

impl EvalConfig {
    pub fn new(threshold: f64) -> Self {
        EvalConfig {
            threshold,
            oracle_offsets: false,
            nms_threshold: DEFAULT_NMS_THRESHOLD,
            max_keep: DEFAULT_MAX_KEEP,
            cap: DEFAULT_PREDICTION_CAP,
        }
    }
}

fn unit_rows(emb: &ClipEmbeddings) -> Vec<Vec<f64>> {
    emb.rows()
        .map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                r.iter().map(|x| x / n).collect()
            } else {
                vec![0.0; r.len()]
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity of every clip to the mean of `members`' unit rows.
fn similarity_to_centroid(units: &[Vec<f64>], members: impl Iterator<Item = usize>) -> Vec<f64> {
    let dim = units.first().map_or(0, Vec::len);
    let mut centroid = vec![0.0; dim];
    for m in members {
        for (c, u) in centroid.iter_mut().zip(&units[m]) {
            *c += u;
        }
    }
    let n = dot(&centroid, &centroid).sqrt();
    if n == 0.0 {
        return vec![0.0; units.len()];
    }
    units.iter().map(|u| dot(u, &centroid) / n).collect()
}

/// Per-clip saliency without labels.
///
/// The seed is the clip with the most neighbours at similarity `threshold`
/// or above (summed similarity breaks ties, then the lower index); the
/// centroid averages those neighbours.
pub fn clip_saliency(emb: &ClipEmbeddings, threshold: f64) -> Vec<f64> {
    let units = unit_rows(emb);
    let score: Vec<(usize, f64)> = units
        .iter()
        .map(|u| {
            let sims = units.iter().map(|v| dot(u, v));
            (sims.clone().filter(|&s| s >= threshold).count(), sims.sum())
        })
        .collect();
    let seed = (0..units.len()).fold(0, |best, i| {
        let (a, b) = (score[i], score[best]);
        if a.0 > b.0 || (a.0 == b.0 && a.1 > b.1) {
            i
        } else {
            best
        }
    });
    let members: Vec<usize> = (0..units.len())
        .filter(|&j| dot(&units[seed], &units[j]) >= threshold)
        .collect();
    similarity_to_centroid(&units, members.into_iter())
}

/// Saliency against the centroid of the labeled foreground clips; used only
/// to calibrate the threshold on training queries.
fn labeled_saliency(emb: &ClipEmbeddings, labels: &[bool]) -> Vec<f64> {
    let units = unit_rows(emb);
    similarity_to_centroid(&units, (0..labels.len()).filter(|&i| labels[i]))
}

fn foreground_labels(query: &ToyQuery) -> Vec<bool> {
    let t = query.features.clips();
    let dt = query.ground_truth.duration() / t as f64;
    (0..t)
        .map(|i| {
            let c = (i as f64 + 0.5) * dt;
            query.ground_truth.segments().iter().any(|s| s.start() <= c && c <= s.end())
        })
        .collect()
}

/// Foreground threshold maximizing clip-level accuracy on `train` queries,
/// with saliency measured against each query's labeled foreground centroid.
pub fn calibrate_threshold(model: &LinearModel, train: &ToyDataset) -> Result<f64> {
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for q in &train.queries {
        let labels = foreground_labels(q);
        let sal = labeled_saliency(&model.project(&q.features)?, &labels);
        scored.extend(sal.into_iter().zip(labels));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Threshold just above index i − 1: everything from i on is foreground.
    let positives = scored.iter().filter(|s| s.1).count();
    let mut correct = positives;
    let mut best = (correct, 0usize);
    for (i, &(_, label)) in scored.iter().enumerate() {
        if label {
            correct -= 1;
        } else {
            correct += 1;
        }
        if correct > best.0 {
            best = (correct, i + 1);
        }
    }
    let cut = best.1;
    let threshold = match cut {
        0 => scored.first().map_or(0.0, |s| s.0),
        c if c == scored.len() => scored.last().map_or(1.0, |s| s.0) + 1e-9,
        c => 0.5 * (scored[c - 1].0 + scored[c].0),
    };
    Ok(threshold)
}

/// Ranked, NMS-filtered windows for one query.
pub fn predict_query(model: &LinearModel, query: &ToyQuery, cfg: &EvalConfig) -> Result<Vec<PredictionWindow>> {
    let emb = model.project(&query.features)?;
    let t = emb.clips();
    let duration = query.ground_truth.duration();
    let dt = duration / t as f64;
    let saliency = clip_saliency(&emb, cfg.threshold);

    let mut start_offset = Vec::with_capacity(t);
    let mut end_offset = Vec::with_capacity(t);
    for i in 0..t {
        let center = (i as f64 + 0.5) * dt;
        let (s, e) = if cfg.oracle_offsets {
            query
                .ground_truth
                .segments()
                .iter()
                .find(|g| g.start() <= center && center <= g.end())
                .map_or((i as f64 * dt, (i + 1) as f64 * dt), |g| (g.start(), g.end()))
        } else if saliency[i] >= cfg.threshold {
            // Nearest boundaries: extend over the run of foreground clips.
            let mut a = i;
            while a > 0 && saliency[a - 1] >= cfg.threshold {
                a -= 1;
            }
            let mut b = i;
            while b + 1 < t && saliency[b + 1] >= cfg.threshold {
                b += 1;
            }
            (a as f64 * dt, (b + 1) as f64 * dt)
        } else {
            (i as f64 * dt, (i + 1) as f64 * dt)
        };
        start_offset.push(s - center);
        end_offset.push(e - center);
    }
    let outputs = ClipOutputs::new(saliency, start_offset, end_offset)?;
    let assembled = assemble_windows(&outputs, duration)?;
    nms_1d(&assembled.windows, cfg.nms_threshold, cfg.max_keep)
}

pub fn predict_dataset(model: &LinearModel, data: &ToyDataset, cfg: &EvalConfig) -> Result<Predictions> {
    data.queries
        .iter()
        .map(|q| Ok((q.ground_truth.query_id(), predict_query(model, q, cfg)?)))
        .collect()
}

/// Scores a model's predictions on `data` with the retrieval metrics.
pub fn evaluate_model(model: &LinearModel, data: &ToyDataset, cfg: &EvalConfig) -> Result<EvalResult> {
    let preds = predict_dataset(model, data, cfg)?;
    evaluate(&preds, &data.ground_truth(), cfg.cap)
}
