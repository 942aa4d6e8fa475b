//! Central finite differences and the randomized gradient certification
//! suite for every loss with an analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{
    aux_boundary_loss, boundary_loss, clip_similarity_loss, dynamic_margin, label_boundary_clips,
    pair_similarity, row_norms, similarity_matrix,
};
use crate::pairset::{build_pair_sets, mine_hard_negatives, CrossSegmentPolicy};
use crate::types::{ClipEmbeddings, LossWeights, MarginParams, Segment, SegmentIndices};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL_REL: f64 = 1e-4;
pub const DEFAULT_TOL_ABS: f64 = 1e-7;
/// Distance to a hinge or SmoothL1 kink below which a sample is redrawn.
pub const KINK_EXCLUSION: f64 = 1e-3;

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate.
///
/// The denominator is the step actually realized in floating point, which
/// keeps linear functions exact up to evaluation round-off.
pub fn finite_diff<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "must be finite and > 0",
        });
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let (up, down) = (x[i] + h, x[i] - h);
        probe[i] = up;
        let plus = f(&probe);
        probe[i] = down;
        let minus = f(&probe);
        probe[i] = x[i];
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFiniteProbe { coordinate: i });
        }
        out.push((plus - minus) / (up - down));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Coordinate of the largest relative error.
    pub worst_coordinate: usize,
    pub passed: bool,
}

/// Compares two gradients coordinate-wise with relative error
/// `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn check(analytic: &[f64], numeric: &[f64], tol_rel: f64, tol_abs: f64) -> Result<GradReport> {
    if analytic.len() != numeric.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("length {}", analytic.len()),
            found: format!("length {}", numeric.len()),
        });
    }
    let mut report = GradReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_coordinate: 0,
        passed: false,
    };
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let abs = (a - n).abs();
        let rel = abs / a.abs().max(n.abs()).max(1e-12);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coordinate = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
    }
    report.passed = report.max_rel_error < tol_rel || report.max_abs_error < tol_abs;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Clip,
    Boundary,
    Aux,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Clip, LossKind::Boundary, LossKind::Aux];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Clip => "clip_similarity",
            LossKind::Boundary => "boundary",
            LossKind::Aux => "aux_boundary",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    /// First seed; trial `t` uses seed `first_seed + t`.
    pub first_seed: u64,
    pub trials: usize,
    pub h: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            first_seed: 0,
            trials: 100,
            h: DEFAULT_STEP,
            tol_rel: DEFAULT_TOL_REL,
            tol_abs: DEFAULT_TOL_ABS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub kind: LossKind,
    pub seed: u64,
    /// Input size: `T·D` for embedding losses, 2 for the auxiliary loss.
    pub inputs: usize,
    /// Whether the loss was non-zero (an active hinge for the boundary loss).
    pub active: bool,
    /// Kink-adjacent draws discarded before this instance.
    pub redraws: usize,
    pub report: GradReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub outcomes: Vec<TrialOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.report.passed)
    }

    pub fn of_kind(&self, kind: LossKind) -> impl Iterator<Item = &TrialOutcome> {
        self.outcomes.iter().filter(move |o| o.kind == kind)
    }
}

const MAX_REDRAWS: usize = 1000;

struct Instance {
    x: Vec<f64>,
    analytic: Vec<f64>,
    value: f64,
    eval: Box<dyn Fn(&[f64]) -> f64>,
}

fn gaussian_embeddings(rng: &mut ChaCha8Rng, clips: usize, dim: usize) -> ClipEmbeddings {
    let data = (0..clips * dim).map(|_| rng.sample(StandardNormal)).collect();
    ClipEmbeddings::new(clips, dim, data).expect("finite gaussian draws")
}

fn clip_instance(rng: &mut ChaCha8Rng) -> Result<Option<Instance>> {
    let clips = rng.gen_range(4..=16);
    let dim = rng.gen_range(3..=8);
    let emb = gaussian_embeddings(rng, clips, dim);
    // 0-based clips first..=last are inside [(first+1)/T, (last+1)/T].
    let first = rng.gen_range(0..clips - 2);
    let last = rng.gen_range(first + 1..clips - 1);
    let t = clips as f64;
    let seg = Segment::new((first + 1) as f64 / t, (last + 1) as f64 / t)?;
    let tau = rng.gen_range(0.05..1.0);
    let k = rng.gen_range(1..=20);
    let sims = similarity_matrix(&emb)?;
    let pairs = mine_hard_negatives(
        &sims,
        build_pair_sets(clips, &[seg], CrossSegmentPolicy::Excluded)?,
        k,
    );
    let r = clip_similarity_loss(&emb, &pairs, tau)?;
    Ok(Some(Instance {
        x: emb.as_slice().to_vec(),
        analytic: r.grad,
        value: r.value,
        eval: Box::new(move |x| {
            ClipEmbeddings::new(clips, dim, x.to_vec())
                .and_then(|e| clip_similarity_loss(&e, &pairs, tau))
                .map_or(f64::NAN, |r| r.value)
        }),
    }))
}

fn boundary_instance(rng: &mut ChaCha8Rng) -> Result<Option<Instance>> {
    let clips = rng.gen_range(4..=16);
    let dim = rng.gen_range(3..=8);
    let window = rng.gen_range(0..=1);
    let start = rng.gen_range(window + 1..clips - 1);
    let end = rng.gen_range(start..clips - 1);
    let seg = SegmentIndices::new(start, end, clips)?;
    let labeling = match label_boundary_clips(&seg, window) {
        Ok(l) => l,
        Err(Error::NoNegativeClips) => return Ok(None),
        Err(e) => return Err(e),
    };
    let params = MarginParams {
        threshold: 0.3,
        base: 0.1,
        length_scaling: rng.gen_range(0.05..0.3),
    };
    let emb = gaussian_embeddings(rng, clips, dim);

    let norms = row_norms(&emb)?;
    let c = labeling.center;
    let mean = |set: &std::collections::BTreeSet<usize>| {
        set.iter().map(|&i| pair_similarity(&emb, &norms, c, i)).sum::<f64>() / set.len() as f64
    };
    let hinge = mean(&labeling.negatives) - mean(&labeling.positives) + dynamic_margin(&seg, &params);
    if hinge.abs() < KINK_EXCLUSION {
        return Ok(None);
    }
    let r = boundary_loss(&emb, &seg, &labeling, &params)?;
    Ok(Some(Instance {
        x: emb.as_slice().to_vec(),
        analytic: r.grad,
        value: r.value,
        eval: Box::new(move |x| {
            ClipEmbeddings::new(clips, dim, x.to_vec())
                .and_then(|e| boundary_loss(&e, &seg, &labeling, &params))
                .map_or(f64::NAN, |r| r.value)
        }),
    }))
}

fn aux_instance(rng: &mut ChaCha8Rng) -> Result<Option<Instance>> {
    let mut draw = || -> f64 { rng.gen_range(0.0..1.0) };
    let (a, b) = (draw(), draw());
    let pred = [draw(), draw()];
    if (a - b).abs() < KINK_EXCLUSION {
        return Ok(None);
    }
    let gt = Segment::new(a.min(b), a.max(b))?;
    let weights = LossWeights {
        lambda_s: rng.gen_range(0.1..3.0),
        lambda_e: rng.gen_range(0.1..3.0),
        lambda_c: rng.gen_range(0.1..3.0),
        lambda_l: rng.gen_range(0.1..3.0),
        beta: if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.05..0.5) },
        ..LossWeights::default()
    };
    let residuals = [
        pred[0] - gt.start(),
        pred[1] - gt.end(),
        0.5 * (pred[0] + pred[1]) - gt.center(),
        pred[1] - pred[0] - gt.length(),
    ];
    if residuals
        .iter()
        .any(|r| r.abs() < KINK_EXCLUSION || (r.abs() - weights.beta).abs() < KINK_EXCLUSION)
    {
        return Ok(None);
    }
    let r = aux_boundary_loss(pred, &gt, &weights)?;
    Ok(Some(Instance {
        x: pred.to_vec(),
        analytic: r.grad,
        value: r.value,
        eval: Box::new(move |x| {
            aux_boundary_loss([x[0], x[1]], &gt, &weights).map_or(f64::NAN, |r| r.value)
        }),
    }))
}

/// Runs `trials` random instances of each loss and compares analytic and
/// central-difference gradients.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let mut outcomes = Vec::with_capacity(3 * config.trials);
    for kind in LossKind::ALL {
        for t in 0..config.trials {
            let seed = config.first_seed + t as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(kind as u64);
            let mut redraws = 0;
            let instance = loop {
                let drawn = match kind {
                    LossKind::Clip => clip_instance(&mut rng)?,
                    LossKind::Boundary => boundary_instance(&mut rng)?,
                    LossKind::Aux => aux_instance(&mut rng)?,
                };
                match drawn {
                    Some(i) => break i,
                    None if redraws < MAX_REDRAWS => redraws += 1,
                    None => {
                        return Err(Error::InvalidParameter {
                            name: "redraws",
                            value: redraws as f64,
                            reason: "no kink-free instance found",
                        })
                    }
                }
            };
            let numeric = finite_diff(&instance.eval, &instance.x, config.h)?;
            let report = check(&instance.analytic, &numeric, config.tol_rel, config.tol_abs)?;
            outcomes.push(TrialOutcome {
                kind,
                seed,
                inputs: instance.x.len(),
                active: instance.value > 0.0,
                redraws,
                report,
            });
        }
    }
    Ok(SuiteReport { outcomes })
}
