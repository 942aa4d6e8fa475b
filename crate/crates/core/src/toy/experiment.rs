use serde::Serialize;

use super::data::{generate_dataset, SyntheticDatasetSpec, ToyDataset};
use super::eval::{calibrate_threshold, evaluate_model, EvalConfig};
use super::train::{train_from, LinearModel, TraceRow, TrainConfig};
use crate::error::Result;
use crate::metrics::EvalResult;

/// Untrained and trained scores of one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub untrained: EvalResult,
    pub untrained_threshold: f64,
    pub trained: EvalResult,
    pub trained_threshold: f64,
    pub trace: Vec<TraceRow>,
    pub model: LinearModel,
}

/// Held-out queries: the same spec with the seed advanced by one.
pub fn held_out_spec(spec: &SyntheticDatasetSpec) -> SyntheticDatasetSpec {
    SyntheticDatasetSpec {
        seed: spec.seed.wrapping_add(1),
        ..spec.clone()
    }
}

/// Trains on `spec`, then scores the initial and final projections on the
/// held-out set with thresholds calibrated on the training set.
pub fn run_experiment(spec: &SyntheticDatasetSpec, cfg: &TrainConfig, cap: usize) -> Result<Experiment> {
    let train_set = generate_dataset(spec)?;
    let test_set = generate_dataset(&held_out_spec(spec))?;
    run_on(&train_set, &test_set, cfg, cap)
}

pub fn run_on(train_set: &ToyDataset, test_set: &ToyDataset, cfg: &TrainConfig, cap: usize) -> Result<Experiment> {
    let initial = LinearModel::random(train_set.spec.raw_dim, train_set.spec.embed_dim, cfg.init_seed);
    let score = |model: &LinearModel| -> Result<(EvalResult, f64)> {
        let threshold = calibrate_threshold(model, train_set)?;
        let eval = EvalConfig {
            cap,
            ..EvalConfig::new(threshold)
        };
        Ok((evaluate_model(model, test_set, &eval)?, threshold))
    };
    let (untrained, untrained_threshold) = score(&initial)?;
    let (model, trace) = train_from(initial, train_set, cfg)?;
    let (trained, trained_threshold) = score(&model)?;
    Ok(Experiment {
        untrained,
        untrained_threshold,
        trained,
        trained_threshold,
        trace,
        model,
    })
}
