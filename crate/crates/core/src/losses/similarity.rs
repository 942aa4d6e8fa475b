use crate::error::{Error, Result};
use crate::types::ClipEmbeddings;

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine similarity of two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("length {}", u.len()),
            found: format!("length {}", v.len()),
        });
    }
    let nu = norm(u);
    if nu == 0.0 {
        return Err(Error::ZeroNormVector("u"));
    }
    let nv = norm(v);
    if nv == 0.0 {
        return Err(Error::ZeroNormVector("v"));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Symmetric `T×T` matrix of pairwise clip similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::ShapeMismatch {
                expected: format!("{size}x{size}"),
                found: data.len().to_string(),
            });
        }
        Ok(SimilarityMatrix { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Row norms, failing on the first zero-norm row.
pub(crate) fn row_norms(emb: &ClipEmbeddings) -> Result<Vec<f64>> {
    emb.rows()
        .enumerate()
        .map(|(i, r)| {
            let n = norm(r);
            if n == 0.0 {
                Err(Error::ZeroNormRow(i))
            } else {
                Ok(n)
            }
        })
        .collect()
}

pub(crate) fn pair_similarity(emb: &ClipEmbeddings, norms: &[f64], i: usize, j: usize) -> f64 {
    // Identical rows are exactly 1 rather than 1 − ε.
    if i == j || emb.row(i) == emb.row(j) {
        return 1.0;
    }
    (dot(emb.row(i), emb.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
}

/// Adds `weight · ∂s_ij/∂emb` into a flat `T×D` gradient buffer.
///
/// `∂s_ij/∂u_i = u_j / (‖u_i‖‖u_j‖) − s_ij · u_i / ‖u_i‖²`, symmetrically for
/// `u_j`. The self-similarity `s_ii` is constant and contributes nothing.
pub(crate) fn accumulate_pair_grad(
    emb: &ClipEmbeddings,
    norms: &[f64],
    i: usize,
    j: usize,
    weight: f64,
    grad: &mut [f64],
) {
    if i == j || weight == 0.0 {
        return;
    }
    let d = emb.dim();
    let (ui, uj) = (emb.row(i), emb.row(j));
    let (ni, nj) = (norms[i], norms[j]);
    let s = dot(ui, uj) / (ni * nj);
    let inv = 1.0 / (ni * nj);
    for k in 0..d {
        grad[i * d + k] += weight * (uj[k] * inv - s * ui[k] / (ni * ni));
        grad[j * d + k] += weight * (ui[k] * inv - s * uj[k] / (nj * nj));
    }
}

/// Pairwise cosine similarities of all clip embeddings; the diagonal is 1.
pub fn similarity_matrix(emb: &ClipEmbeddings) -> Result<SimilarityMatrix> {
    let norms = row_norms(emb)?;
    let t = emb.clips();
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        data[i * t + i] = 1.0;
        for j in i + 1..t {
            let s = pair_similarity(emb, &norms, i, j);
            data[i * t + j] = s;
            data[j * t + i] = s;
        }
    }
    Ok(SimilarityMatrix { size: t, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine_similarity(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine_similarity(&[1.0, 0.0], &[-2.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn cosine_zero_norm_names_vector() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormVector("u"))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroNormVector("v"))
        ));
    }

    #[test]
    fn matrix_small_cases() {
        let one = ClipEmbeddings::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(similarity_matrix(&one).unwrap().as_slice(), &[1.0]);
        let eye = ClipEmbeddings::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(similarity_matrix(&eye).unwrap().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matrix_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let emb = ClipEmbeddings::new(4, 3, data.clone()).unwrap();
        let sims = similarity_matrix(&emb).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (u, v) = (&data[i * 3..i * 3 + 3], &data[j * 3..j * 3 + 3]);
                let mut uv = 0.0;
                let mut uu = 0.0;
                let mut vv = 0.0;
                for k in 0..3 {
                    uv += u[k] * v[k];
                    uu += u[k] * u[k];
                    vv += v[k] * v[k];
                }
                assert_abs_diff_eq!(sims.get(i, j), uv / (uu.sqrt() * vv.sqrt()), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn matrix_reports_zero_row() {
        let emb = ClipEmbeddings::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(similarity_matrix(&emb), Err(Error::ZeroNormRow(1))));
    }
}
