use serde::{Deserialize, Serialize};

use super::dense::Mat;
use super::monomial::Monomial;
use super::poly::Poly;

/// Matrix with polynomial entries. Carries every state-dependent object in
/// the pipeline: dictionaries in matrix form, transformation matrices,
/// controller coefficient matrices, and condition blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialMatrix {
    rows: usize,
    cols: usize,
    n_vars: usize,
    entries: Vec<Poly>,
}

impl PolynomialMatrix {
    pub fn zeros(rows: usize, cols: usize, n_vars: usize) -> Self {
        PolynomialMatrix {
            rows,
            cols,
            n_vars,
            entries: vec![Poly::zero(n_vars); rows * cols],
        }
    }

    pub fn identity(n: usize, n_vars: usize) -> Self {
        let mut m = PolynomialMatrix::zeros(n, n, n_vars);
        for i in 0..n {
            m.set(i, i, Poly::constant(n_vars, 1.0));
        }
        m
    }

    pub fn from_constant(mat: &Mat, n_vars: usize) -> Self {
        let mut out = PolynomialMatrix::zeros(mat.rows(), mat.cols(), n_vars);
        for i in 0..mat.rows() {
            for j in 0..mat.cols() {
                let v = mat.get(i, j);
                if v != 0.0 {
                    out.set(i, j, Poly::constant(n_vars, v));
                }
            }
        }
        out
    }

    /// The n-by-1 matrix whose i-th entry is the variable `x_{i+1}`.
    pub fn state_vector(n: usize) -> Self {
        let mut out = PolynomialMatrix::zeros(n, 1, n);
        for i in 0..n {
            out.set(i, 0, Poly::var(n, i));
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn get(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        assert_eq!(p.n_vars(), self.n_vars);
        self.entries[i * self.cols + j] = p;
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        assert_eq!(x.len(), self.n_vars, "evaluation point arity mismatch");
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j).eval(x));
            }
        }
        m
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn matmul(&self, other: &PolynomialMatrix) -> PolynomialMatrix {
        assert_eq!(self.cols, other.rows, "polynomial matmul shape mismatch");
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = PolynomialMatrix::zeros(self.rows, other.cols, self.n_vars);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Poly::zero(self.n_vars);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Multiply by a constant matrix on the right.
    pub fn matmul_const(&self, other: &Mat) -> PolynomialMatrix {
        assert_eq!(self.cols, other.rows());
        let mut out = PolynomialMatrix::zeros(self.rows, other.cols(), self.n_vars);
        for i in 0..self.rows {
            for j in 0..other.cols() {
                let mut acc = Poly::zero(self.n_vars);
                for k in 0..self.cols {
                    let c = other.get(k, j);
                    if c != 0.0 {
                        acc = acc.add(&self.get(i, k).scale(c));
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn vcat(&self, other: &PolynomialMatrix) -> PolynomialMatrix {
        assert_eq!(self.cols, other.cols);
        assert_eq!(self.n_vars, other.n_vars);
        let mut out = PolynomialMatrix::zeros(self.rows + other.rows, self.cols, self.n_vars);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
        }
        for i in 0..other.rows {
            for j in 0..self.cols {
                out.set(self.rows + i, j, other.get(i, j).clone());
            }
        }
        out
    }

    /// Rows rendered as polynomial vectors; used to locate true-dynamics rows
    /// inside an enclosing dictionary.
    pub fn row_equals(&self, i: usize, other: &PolynomialMatrix, other_row: usize, tol: f64) -> bool {
        if self.cols != other.cols {
            return false;
        }
        (0..self.cols).all(|j| self.get(i, j).approx_eq(other.get(other_row, j), tol))
    }
}

/// Builds a matrix of monomial entries: one row per dictionary entry.
pub fn column_from_dictionary(dict: &[Monomial], n_vars: usize) -> PolynomialMatrix {
    let mut out = PolynomialMatrix::zeros(dict.len(), 1, n_vars);
    for (i, m) in dict.iter().enumerate() {
        out.set(i, 0, Poly::from_monomial(m.clone(), 1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_constant() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pm = PolynomialMatrix::from_constant(&m, 2);
        assert_eq!(pm.eval(&[5.0, 7.0]), m);
    }

    #[test]
    fn state_vector_eval() {
        let sv = PolynomialMatrix::state_vector(3);
        let v = sv.eval(&[1.0, 2.0, 3.0]);
        assert_eq!(v.col(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn polynomial_product() {
        // [x1  x2] * [x2; x1] = [2 x1 x2]
        let mut a = PolynomialMatrix::zeros(1, 2, 2);
        a.set(0, 0, Poly::var(2, 0));
        a.set(0, 1, Poly::var(2, 1));
        let mut b = PolynomialMatrix::zeros(2, 1, 2);
        b.set(0, 0, Poly::var(2, 1));
        b.set(1, 0, Poly::var(2, 0));
        let p = a.matmul(&b);
        assert_eq!(p.get(0, 0).coeff(&Monomial::new(vec![1, 1])), 2.0);
    }
}
