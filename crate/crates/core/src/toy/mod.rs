//! Synthetic moment-retrieval task and a linear model trained on it with the
//! full objective.

mod data;
mod eval;
mod experiment;
mod objective;
mod train;

pub use data::{generate_dataset, SyntheticDatasetSpec, ToyDataset, ToyQuery};
pub use eval::{calibrate_threshold, clip_saliency, evaluate_model, predict_dataset, predict_query, EvalConfig};
pub use experiment::{held_out_spec, run_experiment, run_on, Experiment};
pub use objective::{query_objective, ObjectiveConfig, QueryObjective};
pub use train::{dataset_objective, train, train_from, LinearModel, TraceRow, TrainConfig};
