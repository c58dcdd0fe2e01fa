//! Conformal class at a point from null vectors.
//!
//! Each null vector `v` gives one linear equation `g_ij v^i v^j = 0` in the
//! `n(n+1)/2` independent components of `g`. Generic configurations of
//! `n(n+1)/2 − 1` vectors leave a one-dimensional solution space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::null_space;

/// Relative pivot threshold for the rank decision.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Null vectors sampled at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    #[serde(default)]
    pub point: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Number of vectors needed in dimension `n`.
pub fn required_vectors(n: usize) -> usize {
    n * (n + 1) / 2 - 1
}

/// Reconstructs the metric, canonicalized by [`canonicalize`], from null vectors.
pub fn reconstruct_conformal(vectors: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("cone reconstruction needs dimension >= 2, got {n}")));
    }
    for (k, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(Error::InvalidInput(format!("vector {k} has {} components, expected {n}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("vector {k} has non-finite components")));
        }
        if v.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidInput(format!("vector {k} is zero")));
        }
    }
    let needed = required_vectors(n);
    if vectors.len() < needed {
        return Err(Error::TooFewVectors {
            got: vectors.len(),
            needed,
        });
    }
    let cols = n * (n + 1) / 2;
    let mut rows = Vec::with_capacity(vectors.len() * cols);
    for v in vectors {
        for i in 0..n {
            for j in i..n {
                let m = v[i] * v[j];
                rows.push(if i == j { m } else { 2.0 * m });
            }
        }
    }
    let ns = null_space(&rows, vectors.len(), cols, RANK_TOLERANCE);
    if ns.basis.len() != 1 {
        return Err(Error::NonGenericConfiguration {
            nullity: ns.basis.len(),
        });
    }
    let x = &ns.basis[0];
    let mut g = vec![0.0; n * n];
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            g[i * n + j] = x[idx];
            g[j * n + i] = x[idx];
            idx += 1;
        }
    }
    Ok(canonicalize(&g))
}

/// Scales to unit ∞-norm with the first nonzero entry (row-major) positive.
/// The zero matrix is returned unchanged.
pub fn canonicalize(g: &[f64]) -> Vec<f64> {
    let max = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let Some(first) = g.iter().find(|x| **x != 0.0) else {
        return g.to_vec();
    };
    let s = first.signum() / max;
    let mut out: Vec<f64> = g.iter().map(|x| x * s).collect();
    // exact ±1 for the largest entries keeps canonicalization idempotent
    for (o, x) in out.iter_mut().zip(g) {
        if x.abs() == max {
            *o = o.signum();
        }
    }
    out
}

/// Largest entrywise difference after canonicalizing both matrices.
pub fn conformal_deviation(a: &[f64], b: &[f64]) -> f64 {
    canonicalize(a)
        .iter()
        .zip(canonicalize(b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
