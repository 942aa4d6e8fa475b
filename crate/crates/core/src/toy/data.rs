use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClipEmbeddings, GroundTruthEntry, QueryId, Segment};

/// Minimum number of background clips between two answer segments.
const MIN_GAP_CLIPS: usize = 3;

/// Shape of a synthetic moment-retrieval dataset.
///
/// Raw clip features have `raw_dim` coordinates: the leading
/// `raw_dim − nuisance_dim` carry the semantic signal, the trailing
/// `nuisance_dim` carry per-clip Gaussian nuisance that a useful projection
/// has to suppress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub num_queries: usize,
    pub clips: usize,
    pub raw_dim: usize,
    pub embed_dim: usize,
    pub nuisance_dim: usize,
    pub nuisance_sigma: f64,
    /// Probabilities of 1, 2 and 3 answer segments per query.
    pub segment_count_probs: [f64; 3],
    pub min_segment_clips: usize,
    pub max_segment_clips: usize,
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    /// Video duration in seconds.
    pub duration: f64,
    pub seed: u64,
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        SyntheticDatasetSpec {
            num_queries: 64,
            clips: 32,
            raw_dim: 24,
            embed_dim: 8,
            nuisance_dim: 12,
            nuisance_sigma: 3.0,
            // Mean of 2.4 segments per query.
            segment_count_probs: [0.1, 0.4, 0.5],
            min_segment_clips: 2,
            max_segment_clips: 6,
            cluster_separation: 4.0,
            noise_sigma: 0.1,
            duration: 150.0,
            seed: 0,
        }
    }
}

impl SyntheticDatasetSpec {
    pub fn signal_dim(&self) -> usize {
        self.raw_dim - self.nuisance_dim
    }

    pub fn mean_segments(&self) -> f64 {
        let total: f64 = self.segment_count_probs.iter().sum();
        self.segment_count_probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p / total)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let count = |name, value: usize| {
            if value == 0 {
                Err(Error::InvalidParameter {
                    name,
                    value: 0.0,
                    reason: "must be >= 1",
                })
            } else {
                Ok(())
            }
        };
        count("num_queries", self.num_queries)?;
        count("clips", self.clips)?;
        count("raw_dim", self.raw_dim)?;
        count("embed_dim", self.embed_dim)?;
        count("min_segment_clips", self.min_segment_clips)?;
        if self.nuisance_dim >= self.raw_dim {
            return Err(Error::InvalidParameter {
                name: "nuisance_dim",
                value: self.nuisance_dim as f64,
                reason: "must be smaller than raw_dim",
            });
        }
        if self.max_segment_clips < self.min_segment_clips {
            return Err(Error::InvalidParameter {
                name: "max_segment_clips",
                value: self.max_segment_clips as f64,
                reason: "must be >= min_segment_clips",
            });
        }
        let worst_case = 3 * self.max_segment_clips + 2 * MIN_GAP_CLIPS;
        if worst_case >= self.clips {
            return Err(Error::InvalidParameter {
                name: "clips",
                value: self.clips as f64,
                reason: "too few clips to place three segments of maximum length",
            });
        }
        for (name, value) in [
            ("cluster_separation", self.cluster_separation),
            ("noise_sigma", self.noise_sigma),
            ("nuisance_sigma", self.nuisance_sigma),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite and >= 0",
                });
            }
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                value: self.duration,
                reason: "must be finite and > 0",
            });
        }
        if self
            .segment_count_probs
            .iter()
            .any(|p| !(p.is_finite() && *p >= 0.0))
            || self.segment_count_probs.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidParameter {
                name: "segment_count_probs",
                value: self.segment_count_probs.iter().sum(),
                reason: "must be non-negative with a positive sum",
            });
        }
        Ok(())
    }
}

/// One synthetic query: raw clip features and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyQuery {
    pub features: ClipEmbeddings,
    pub ground_truth: GroundTruthEntry,
    /// Background clip that sits close to the query concept, if one fit.
    pub confuser: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub spec: SyntheticDatasetSpec,
    pub queries: Vec<ToyQuery>,
}

impl ToyDataset {
    pub fn ground_truth(&self) -> Vec<GroundTruthEntry> {
        self.queries.iter().map(|q| q.ground_truth.clone()).collect()
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn scaled_to(v: Vec<f64>, norm: f64) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return v;
    }
    v.into_iter().map(|x| x * norm / n).collect()
}

/// Random unit vector orthogonal to `axis` (Gram-Schmidt on a Gaussian draw).
fn orthogonal_unit(rng: &mut ChaCha8Rng, axis: &[f64]) -> Vec<f64> {
    let axis_sq: f64 = axis.iter().map(|a| a * a).sum();
    loop {
        let mut v = gaussian_vec(rng, axis.len());
        if axis_sq > 0.0 {
            let proj = v.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>() / axis_sq;
            for (x, a) in v.iter_mut().zip(axis) {
                *x -= proj * a;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Places `lengths` in order with at least [`MIN_GAP_CLIPS`] between them,
/// spreading the slack uniformly. Returns start clips.
fn place_segments(rng: &mut ChaCha8Rng, clips: usize, lengths: &[usize]) -> Vec<usize> {
    let used: usize = lengths.iter().sum::<usize>() + MIN_GAP_CLIPS * (lengths.len() - 1);
    let slack = clips - used;
    let mut cuts: Vec<usize> = (0..lengths.len()).map(|_| rng.gen_range(0..=slack)).collect();
    cuts.sort_unstable();
    let mut starts = Vec::with_capacity(lengths.len());
    let mut cursor = 0;
    let mut prev_cut = 0;
    for (k, (&len, &cut)) in lengths.iter().zip(&cuts).enumerate() {
        cursor += cut - prev_cut;
        prev_cut = cut;
        if k > 0 {
            cursor += MIN_GAP_CLIPS;
        }
        starts.push(cursor);
        cursor += len;
    }
    starts
}

/// Generates features and ground truth for every query; deterministic in
/// `spec.seed`.
///
/// Clips inside an answer segment are the query concept plus noise; other
/// clips are independent distractor concepts plus noise, except one
/// confuser at distance `cluster_separation / 2` from the concept.
pub fn generate_dataset(spec: &SyntheticDatasetSpec) -> Result<ToyDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count_dist = WeightedIndex::new(spec.segment_count_probs).map_err(|_| Error::InvalidParameter {
        name: "segment_count_probs",
        value: 0.0,
        reason: "not a valid distribution",
    })?;
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let nuisance = Normal::new(0.0, spec.nuisance_sigma).expect("validated sigma");
    let signal_dim = spec.signal_dim();
    // Independent draws of this norm are about `cluster_separation` apart.
    let concept_norm = spec.cluster_separation / std::f64::consts::SQRT_2;
    let clip_len = spec.duration / spec.clips as f64;

    let mut queries = Vec::with_capacity(spec.num_queries);
    for q in 0..spec.num_queries {
        let n_segments = count_dist.sample(&mut rng) + 1;
        let lengths: Vec<usize> = (0..n_segments)
            .map(|_| rng.gen_range(spec.min_segment_clips..=spec.max_segment_clips))
            .collect();
        let starts = place_segments(&mut rng, spec.clips, &lengths);
        let mut inside = vec![false; spec.clips];
        for (&s, &l) in starts.iter().zip(&lengths) {
            inside[s..s + l].iter_mut().for_each(|v| *v = true);
        }

        let concept = scaled_to(gaussian_vec(&mut rng, signal_dim), concept_norm);
        let far_from_segments: Vec<usize> = (0..spec.clips)
            .filter(|&i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(spec.clips - 1);
                !inside[lo..=hi].iter().any(|&v| v)
            })
            .collect();
        let confuser = if far_from_segments.is_empty() {
            None
        } else {
            Some(far_from_segments[rng.gen_range(0..far_from_segments.len())])
        };

        let mut data = Vec::with_capacity(spec.clips * spec.raw_dim);
        for i in 0..spec.clips {
            let base = if inside[i] {
                concept.clone()
            } else if Some(i) == confuser {
                let dir = orthogonal_unit(&mut rng, &concept);
                concept
                    .iter()
                    .zip(&dir)
                    .map(|(c, d)| c + 0.5 * spec.cluster_separation * d)
                    .collect()
            } else {
                scaled_to(gaussian_vec(&mut rng, signal_dim), concept_norm)
            };
            data.extend(base.iter().map(|b| b + noise.sample(&mut rng)));
            data.extend((0..spec.nuisance_dim).map(|_| nuisance.sample(&mut rng)));
        }

        let segments = starts
            .iter()
            .zip(&lengths)
            .map(|(&s, &l)| Segment::new(s as f64 * clip_len, (s + l) as f64 * clip_len))
            .collect::<Result<Vec<_>>>()?;
        let qid = QueryId(q as u64);
        queries.push(ToyQuery {
            features: ClipEmbeddings::new(spec.clips, spec.raw_dim, data)?,
            ground_truth: GroundTruthEntry::new(qid, format!("synthetic_{q:04}"), spec.duration, segments)?,
            confuser,
        });
    }
    Ok(ToyDataset {
        spec: spec.clone(),
        queries,
    })
}
