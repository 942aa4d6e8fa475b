//! Flat `key = value` configuration with `#` comments.
//!
//! Keys are the field names of [`LossWeights`](crate::LossWeights),
//! [`MarginParams`](crate::MarginParams) and
//! [`SyntheticDatasetSpec`](crate::toy::SyntheticDatasetSpec), plus a few
//! training and evaluation settings. Later assignments win.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_PREDICTION_CAP;
use crate::toy::{SyntheticDatasetSpec, TrainConfig};

/// Every tunable the command-line tool reads.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dataset: SyntheticDatasetSpec,
    pub train: TrainConfig,
    pub cap: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dataset: SyntheticDatasetSpec::default(),
            train: TrainConfig::default(),
            cap: DEFAULT_PREDICTION_CAP,
        }
    }
}

pub const KEYS: &[&str] = &[
    "lambda_basic",
    "lambda_clip",
    "lambda_boun",
    "lambda_b_aux",
    "lambda_s",
    "lambda_e",
    "lambda_c",
    "lambda_l",
    "tau",
    "k",
    "beta",
    "threshold",
    "base",
    "length_scaling",
    "num_queries",
    "clips",
    "raw_dim",
    "embed_dim",
    "nuisance_dim",
    "nuisance_sigma",
    "segment_count_probs",
    "min_segment_clips",
    "max_segment_clips",
    "cluster_separation",
    "noise_sigma",
    "duration",
    "seed",
    "window",
    "cross_segment_policy",
    "saliency_gain",
    "saliency_bias",
    "aux_context",
    "steps",
    "learning_rate",
    "init_seed",
    "cap",
];

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad value `{value}`: {e}"))
}

fn parse_probs(value: &str) -> std::result::Result<[f64; 3], String> {
    let parts = value
        .split(',')
        .map(|p| parse::<f64>(p.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected three comma-separated probabilities, got `{value}`"))
}

impl Settings {
    /// Assigns one key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "lambda_basic" => self.train.objective.weights.lambda_basic = parse(value)?,
            "lambda_clip" => self.train.objective.weights.lambda_clip = parse(value)?,
            "lambda_boun" => self.train.objective.weights.lambda_boun = parse(value)?,
            "lambda_b_aux" => self.train.objective.weights.lambda_b_aux = parse(value)?,
            "lambda_s" => self.train.objective.weights.lambda_s = parse(value)?,
            "lambda_e" => self.train.objective.weights.lambda_e = parse(value)?,
            "lambda_c" => self.train.objective.weights.lambda_c = parse(value)?,
            "lambda_l" => self.train.objective.weights.lambda_l = parse(value)?,
            "tau" => self.train.objective.weights.tau = parse(value)?,
            "k" => self.train.objective.weights.k = parse(value)?,
            "beta" => self.train.objective.weights.beta = parse(value)?,
            "threshold" => self.train.objective.margin.threshold = parse(value)?,
            "base" => self.train.objective.margin.base = parse(value)?,
            "length_scaling" => self.train.objective.margin.length_scaling = parse(value)?,
            "num_queries" => self.dataset.num_queries = parse(value)?,
            "clips" => self.dataset.clips = parse(value)?,
            "raw_dim" => self.dataset.raw_dim = parse(value)?,
            "embed_dim" => self.dataset.embed_dim = parse(value)?,
            "nuisance_dim" => self.dataset.nuisance_dim = parse(value)?,
            "nuisance_sigma" => self.dataset.nuisance_sigma = parse(value)?,
            "segment_count_probs" => self.dataset.segment_count_probs = parse_probs(value)?,
            "min_segment_clips" => self.dataset.min_segment_clips = parse(value)?,
            "max_segment_clips" => self.dataset.max_segment_clips = parse(value)?,
            "cluster_separation" => self.dataset.cluster_separation = parse(value)?,
            "noise_sigma" => self.dataset.noise_sigma = parse(value)?,
            "duration" => self.dataset.duration = parse(value)?,
            "seed" => self.dataset.seed = parse(value)?,
            "window" => self.train.objective.window = parse(value)?,
            "cross_segment_policy" => self.train.objective.policy = parse(value)?,
            "saliency_gain" => self.train.objective.saliency_gain = parse(value)?,
            "saliency_bias" => self.train.objective.saliency_bias = parse(value)?,
            "aux_context" => self.train.objective.aux_context = parse(value)?,
            "steps" => self.train.steps = parse(value)?,
            "learning_rate" => self.train.learning_rate = parse(value)?,
            "init_seed" => self.train.init_seed = parse(value)?,
            "cap" => self.cap = parse(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Applies every assignment in `text`; `path` only labels errors.
    pub fn apply_str(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, path)
    }

    /// Applies a `KEY=VALUE` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        self.apply_str(assignment, Path::new("--set"))
    }

    /// Checks every section.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.objective.validate()
    }

    /// Renders all keys in [`KEYS`] order; parsing the output reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let w = &self.train.objective.weights;
        let m = &self.train.objective.margin;
        let d = &self.dataset;
        let o = &self.train.objective;
        let p = d.segment_count_probs;
        let policy = serde_json::to_value(o.policy).expect("policy serializes");
        let values: Vec<String> = vec![
            w.lambda_basic.to_string(),
            w.lambda_clip.to_string(),
            w.lambda_boun.to_string(),
            w.lambda_b_aux.to_string(),
            w.lambda_s.to_string(),
            w.lambda_e.to_string(),
            w.lambda_c.to_string(),
            w.lambda_l.to_string(),
            w.tau.to_string(),
            w.k.to_string(),
            w.beta.to_string(),
            m.threshold.to_string(),
            m.base.to_string(),
            m.length_scaling.to_string(),
            d.num_queries.to_string(),
            d.clips.to_string(),
            d.raw_dim.to_string(),
            d.embed_dim.to_string(),
            d.nuisance_dim.to_string(),
            d.nuisance_sigma.to_string(),
            format!("{},{},{}", p[0], p[1], p[2]),
            d.min_segment_clips.to_string(),
            d.max_segment_clips.to_string(),
            d.cluster_separation.to_string(),
            d.noise_sigma.to_string(),
            d.duration.to_string(),
            d.seed.to_string(),
            o.window.to_string(),
            policy.as_str().unwrap_or_default().to_string(),
            o.saliency_gain.to_string(),
            o.saliency_bias.to_string(),
            o.aux_context.to_string(),
            self.train.steps.to_string(),
            self.train.learning_rate.to_string(),
            self.train.init_seed.to_string(),
            self.cap.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairset::CrossSegmentPolicy;

    #[test]
    fn parses_comments_and_blank_lines() {
        let mut s = Settings::default();
        s.apply_str("# weights\nlambda_clip = 0   # ablation\n\nk=5\ncross_segment_policy = positive\n", Path::new("c"))
            .unwrap();
        assert_eq!(s.train.objective.weights.lambda_clip, 0.0);
        assert_eq!(s.train.objective.weights.k, 5);
        assert_eq!(s.train.objective.policy, CrossSegmentPolicy::Positive);
    }

    #[test]
    fn unknown_key_reports_line() {
        let mut s = Settings::default();
        match s.apply_str("tau = 0.1\nlamda_clip = 1\n", Path::new("c")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("lamda_clip"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_value_and_missing_equals_fail() {
        let mut s = Settings::default();
        assert!(s.apply_str("tau = fast", Path::new("c")).is_err());
        assert!(s.apply_str("tau", Path::new("c")).is_err());
        assert!(s.apply_str("segment_count_probs = 0.5,0.5", Path::new("c")).is_err());
    }

    #[test]
    fn override_wins() {
        let mut s = Settings::default();
        s.apply_str("seed = 3", Path::new("c")).unwrap();
        s.apply_override("seed=9").unwrap();
        assert_eq!(s.dataset.seed, 9);
    }

    #[test]
    fn rendering_round_trips() {
        let mut s = Settings::default();
        s.apply_str("tau = 0.123\nsegment_count_probs = 0.2, 0.3, 0.5\ncap = 4\nlearning_rate = 0.01", Path::new("c"))
            .unwrap();
        let mut back = Settings::default();
        back.apply_str(&s.to_config_string(), Path::new("c")).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.to_config_string().lines().count(), KEYS.len());
    }
}
