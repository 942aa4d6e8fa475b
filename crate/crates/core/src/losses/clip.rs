use crate::error::{Error, Result};
use crate::pairset::{ClipPair, PairSets};
use crate::types::{ClipEmbeddings, LossResult};

use super::similarity::{accumulate_pair_grad, pair_similarity, row_norms};

/// `log Σ exp(x)` with max-subtraction, plus the softmax weights of `x`.
fn log_sum_exp(x: &[f64]) -> (f64, Vec<f64>) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_pairs(pairs: &[ClipPair], clips: usize) -> Result<()> {
    for &(i, j) in pairs {
        for index in [i, j] {
            if index >= clips {
                return Err(Error::ClipOutOfRange { index, clips });
            }
        }
    }
    Ok(())
}

/// Contrastive loss of positive pairs against mined hard negatives:
///
/// `−log( Σ_P e^{s/τ} / (Σ_P e^{s/τ} + Σ_{N_k} e^{s/τ}) )`.
///
/// Evaluated as `softplus(LSE_{N_k} − LSE_P)`, which is exact, never
/// negative, and stable for small `τ`. The gradient is taken with the pair
/// sets held fixed.
pub fn clip_similarity_loss(emb: &ClipEmbeddings, pairs: &PairSets, tau: f64) -> Result<LossResult> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            value: tau,
            reason: "must be finite and > 0",
        });
    }
    if pairs.positives.is_empty() {
        return Err(Error::NoPositivePairs);
    }
    let clips = emb.clips();
    check_pairs(&pairs.positives, clips)?;
    check_pairs(&pairs.hard_negatives, clips)?;
    if pairs.hard_negatives.is_empty() {
        return Ok(LossResult::zero(clips * emb.dim()));
    }

    let norms = row_norms(emb)?;
    let logits = |set: &[ClipPair]| -> Vec<f64> {
        set.iter()
            .map(|&(i, j)| pair_similarity(emb, &norms, i, j) / tau)
            .collect()
    };
    let (lse_pos, w_pos) = log_sum_exp(&logits(&pairs.positives));
    let (lse_neg, w_neg) = log_sum_exp(&logits(&pairs.hard_negatives));
    let gap = lse_neg - lse_pos;
    let value = softplus(gap);

    // ∂L/∂gap = σ(gap); ∂gap/∂s = ±softmax / τ within each set.
    let scale = sigmoid(gap) / tau;
    let mut grad = vec![0.0; clips * emb.dim()];
    for (&(i, j), w) in pairs.positives.iter().zip(&w_pos) {
        accumulate_pair_grad(emb, &norms, i, j, -scale * w, &mut grad);
    }
    for (&(i, j), w) in pairs.hard_negatives.iter().zip(&w_neg) {
        accumulate_pair_grad(emb, &norms, i, j, scale * w, &mut grad);
    }
    Ok(LossResult { value, grad })
}
