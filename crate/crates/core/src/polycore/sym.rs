//! Symmetric matrices with packed lower-triangle storage, plus the cyclic
//! Jacobi eigensolver every downstream module leans on.
//!
//! Jacobi rotations are slower than tridiagonalization + QL for large
//! matrices, but they are foolproof for the ≤ ~100-dimensional Gram blocks
//! this pipeline produces, and they need no workspace tuning.

use serde::{Deserialize, Serialize};

use super::dense::Mat;
use crate::error::{Error, Result};

/// Symmetric real matrix; only the lower triangle is stored, so symmetry is
/// structural rather than a runtime invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    /// Row-wise packed lower triangle: `(i, j)` with `i >= j` at `i(i+1)/2 + j`.
    lower: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.set(i, i, s);
        }
        m
    }

    /// Symmetrizes the input: entries are averaged across the diagonal.
    pub fn from_dense(m: &Mat) -> Self {
        assert_eq!(m.rows(), m.cols(), "from_dense needs a square matrix");
        let dim = m.rows();
        let mut out = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                out.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
            }
        }
        out
    }

    pub fn from_lower_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut out = SymMatrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), i + 1, "row {i} must have {} entries", i + 1);
            for (j, &v) in row.iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        debug_assert!(i >= j);
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.lower[Self::idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.lower[Self::idx(i, j)] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.lower[Self::idx(i, j)] += v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.get(i, j) * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            lower: self.lower.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    /// Eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues sorted ascending and the matching orthonormal
    /// eigenvector matrix (eigenvectors in columns). Convergence: off-diagonal
    /// Frobenius mass below `1e-14` times the matrix norm.
    pub fn eig(&self) -> (Vec<f64>, Mat) {
        let n = self.dim;
        let mut a = self.to_dense();
        let mut v = Mat::identity(n);
        if n == 0 {
            return (Vec::new(), v);
        }
        let norm = self.frob_norm().max(f64::MIN_POSITIVE);
        let tol = 1e-14 * norm;

        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..i {
                    off += 2.0 * a.get(i, j) * a.get(i, j);
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
        let eigs: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vecs = Mat::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                vecs.set(k, new_col, v.get(k, old_col));
            }
        }
        (eigs, vecs)
    }

    pub fn min_eig(&self) -> f64 {
        self.eig().0.first().copied().unwrap_or(0.0)
    }

    pub fn max_eig(&self) -> f64 {
        self.eig().0.last().copied().unwrap_or(0.0)
    }

    /// The unique PSD square root, via eigendecomposition.
    ///
    /// Eigenvalues slightly negative from roundoff (above `-1e-12 * ||M||`)
    /// are clipped to zero; anything below that fails.
    pub fn sqrt_psd(&self) -> Result<SymMatrix> {
        let (eigs, vecs) = self.eig();
        let norm = self
            .lower
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let tol = 1e-12 * norm;
        if let Some(&min) = eigs.first() {
            if min < -tol {
                return Err(Error::NotPsd {
                    min_eig: min,
                    tol: -tol,
                });
            }
        }
        let n = self.dim;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for (k, &lam) in eigs.iter().enumerate() {
                    let root = lam.max(0.0).sqrt();
                    s += vecs.get(i, k) * root * vecs.get(j, k);
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }

    /// Spectral inverse. Errors when the condition number exceeds `cond_max`.
    pub fn inverse_spd(&self, cond_max: f64) -> Result<SymMatrix> {
        let (eigs, vecs) = self.eig();
        let min = eigs.first().copied().unwrap_or(0.0);
        let max = eigs.last().copied().unwrap_or(0.0);
        if min <= 0.0 || max / min > cond_max {
            return Err(Error::Recovery(format!(
                "matrix numerically singular: eigenvalue range [{min:.3e}, {max:.3e}]"
            )));
        }
        let n = self.dim;
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for (k, &lam) in eigs.iter().enumerate() {
                    s += vecs.get(i, k) * vecs.get(j, k) / lam;
                }
                out.set(i, j, s);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_identity() {
        let (eigs, _) = SymMatrix::identity(3).eig();
        for e in eigs {
            assert!((e - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eig_diag_sorted() {
        let (eigs, _) = SymMatrix::diag(&[5.0, 1.0, 2.0]).eig();
        assert_eq!(eigs, vec![1.0, 2.0, 5.0]);
    }

    #[test]
    fn eig_reconstructs() {
        let m = SymMatrix::from_lower_rows(&[
            vec![2.0],
            vec![1.0, 3.0],
            vec![0.5, -1.0, 4.0],
        ]);
        let (eigs, v) = m.eig();
        // V Λ Vᵀ == M
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += v.get(i, k) * eigs[k] * v.get(j, k);
                }
                assert!((s - m.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrt_of_diag() {
        let m = SymMatrix::diag(&[4.0, 9.0]);
        let r = m.sqrt_psd().unwrap();
        assert!((r.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((r.get(1, 1) - 3.0).abs() < 1e-12);
        assert!(r.get(1, 0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = SymMatrix::from_lower_rows(&[vec![2.0], vec![1.0, 2.0]]);
        let r = m.sqrt_psd().unwrap().to_dense();
        let sq = r.matmul(&r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((sq.get(i, j) - m.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        assert!(SymMatrix::diag(&[1.0, -1.0]).sqrt_psd().is_err());
    }
}
