//! Small dense kernels on row-major `f64` matrices.

/// Determinant by LU elimination with partial pivoting.
pub fn determinant(a: &[f64], n: usize) -> f64 {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap();
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                m.swap(piv * n + c, col * n + c);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
        }
    }
    det
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `k` (entries `vectors[i * n + k]`) is the unit eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        let n = self.values.len();
        (0..n).map(|i| self.vectors[i * n + k]).collect()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn jacobi_eigen(a: &[f64], n: usize) -> SymmetricEigen {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * total * 1e-2 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with J the (p, q) rotation
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymmetricEigen {
        values: (0..n).map(|i| m[i * n + i]).collect(),
        vectors: v,
    }
}

/// Null space of an `m x cols` matrix.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub rank: usize,
    pub basis: Vec<Vec<f64>>,
}

/// Gauss-Jordan elimination with full pivoting. A pivot is treated as zero
/// when it falls below `rel_tol` times the first (largest) pivot.
pub fn null_space(a: &[f64], rows: usize, cols: usize, rel_tol: f64) -> NullSpace {
    assert_eq!(a.len(), rows * cols);
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    let mut first_pivot = 0.0;
    while rank < rows.min(cols) {
        let mut best = (rank, rank, 0.0f64);
        for r in rank..rows {
            for c in rank..cols {
                let v = m[r * cols + c].abs();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        if rank == 0 {
            first_pivot = best.2;
        }
        if best.2 == 0.0 || best.2 < rel_tol * first_pivot {
            break;
        }
        let (pr, pc, _) = best;
        if pr != rank {
            for c in 0..cols {
                m.swap(pr * cols + c, rank * cols + c);
            }
        }
        if pc != rank {
            for r in 0..rows {
                m.swap(r * cols + pc, r * cols + rank);
            }
            perm.swap(pc, rank);
        }
        let p = m[rank * cols + rank];
        for c in 0..cols {
            m[rank * cols + c] /= p;
        }
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let f = m[r * cols + rank];
            if f != 0.0 {
                for c in 0..cols {
                    m[r * cols + c] -= f * m[rank * cols + c];
                }
            }
        }
        rank += 1;
    }
    let basis = (rank..cols)
        .map(|free| {
            let mut x = vec![0.0; cols];
            x[perm[free]] = 1.0;
            for i in 0..rank {
                x[perm[i]] = -m[i * cols + free];
            }
            x
        })
        .collect();
    NullSpace { rank, basis }
}
