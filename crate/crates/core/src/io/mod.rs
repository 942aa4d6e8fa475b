//! File formats: JSONL annotations and predictions, `CTB1` feature binaries,
//! flat configuration files.

pub mod config;
pub mod ctb1;
pub mod jsonl;

pub use config::Settings;
pub use ctb1::{read_ctb1, write_ctb1};
pub use jsonl::{parse_ground_truth, parse_predictions, write_ground_truth, write_predictions, GroundTruthRecord, PredictionRecord};
