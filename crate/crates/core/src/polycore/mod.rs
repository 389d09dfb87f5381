//! Multivariate polynomial algebra over a subsystem state plus the dense
//! symmetric linear algebra (Jacobi eigendecomposition, PSD square root,
//! spectral norm) that every other module depends on.
//!
//! All values are immutable after construction and all operations are pure
//! functions, so everything here is safe to share across threads.

pub mod dense;
pub mod monomial;
pub mod poly;
pub mod polymat;
pub mod sym;

pub use dense::{cholesky, cholesky_solve, singular_values, spectral_norm, Mat};
pub use monomial::{graded_basis, Monomial};
pub use poly::Poly;
pub use polymat::{column_from_dictionary, PolynomialMatrix};
pub use sym::SymMatrix;

use crate::error::{Error, Result};

/// Evaluate a monomial dictionary at a point: component `k` is the `k`-th
/// dictionary monomial evaluated at `x`.
pub fn eval_dictionary(dict: &[Monomial], x: &[f64]) -> Result<Vec<f64>> {
    for (i, m) in dict.iter().enumerate() {
        if m.n_vars() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "dictionary entry {i} has {} variables, point has {}",
                m.n_vars(),
                x.len()
            )));
        }
    }
    Ok(dict.iter().map(|m| m.eval(x)).collect())
}

/// Factor a dictionary through the state: returns `Psi` with `Psi(x) * x`
/// identical to the dictionary column vector.
///
/// Every dictionary entry must have total degree at least one (so the
/// dictionary vanishes at the origin). The default factorization divides each
/// monomial by its lowest-indexed variable with a positive exponent; an
/// `override_psi` is validated against the same identity and returned as-is,
/// which reproduces hand-picked factorizations exactly.
pub fn factor_transformation(
    dict: &[Monomial],
    n: usize,
    override_psi: Option<PolynomialMatrix>,
) -> Result<PolynomialMatrix> {
    for (i, m) in dict.iter().enumerate() {
        if m.n_vars() != n {
            return Err(Error::DimensionMismatch(format!(
                "dictionary entry {i} has {} variables, state dimension is {n}",
                m.n_vars()
            )));
        }
        if m.total_degree() == 0 {
            return Err(Error::DegreeZeroMonomial { index: i });
        }
    }

    let psi = match override_psi {
        Some(p) => {
            if p.rows() != dict.len() || p.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "override transformation is {}x{}, expected {}x{}",
                    p.rows(),
                    p.cols(),
                    dict.len(),
                    n
                )));
            }
            p
        }
        None => {
            let mut p = PolynomialMatrix::zeros(dict.len(), n, n);
            for (i, m) in dict.iter().enumerate() {
                let pivot = m
                    .exponents()
                    .iter()
                    .position(|&e| e > 0)
                    .expect("degree >= 1 checked above");
                let reduced = m.div_var(pivot).expect("pivot has positive exponent");
                p.set(i, pivot, Poly::from_monomial(reduced, 1.0));
            }
            p
        }
    };

    verify_factorization(dict, &psi)?;
    Ok(psi)
}

/// Symbolic check that `Psi(x) * x` reproduces the dictionary, coefficient by
/// coefficient. Exponents are compared exactly; coefficients at 1e-12.
pub fn verify_factorization(dict: &[Monomial], psi: &PolynomialMatrix) -> Result<()> {
    let n = psi.cols();
    let product = psi.matmul(&PolynomialMatrix::state_vector(n));
    for (i, m) in dict.iter().enumerate() {
        let expected = Poly::from_monomial(m.clone(), 1.0);
        if !product.get(i, 0).approx_eq(&expected, 1e-12) {
            return Err(Error::FactorizationIdentity {
                index: i,
                got: product.get(i, 0).to_string(),
                expected: expected.to_string(),
            });
        }
    }
    Ok(())
}

/// Eigendecomposition front door matching the rest of the toolkit's
/// conventions: eigenvalues ascending, orthonormal eigenvectors in columns.
pub fn sym_eig(m: &SymMatrix) -> (Vec<f64>, Mat) {
    m.eig()
}

/// PSD square root front door.
pub fn sqrt_psd(m: &SymMatrix) -> Result<SymMatrix> {
    m.sqrt_psd()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    #[test]
    fn eval_dictionary_basic() {
        // dict [x1, x2, x1*x2] at (2,3)
        let dict = vec![mono(&[1, 0]), mono(&[0, 1]), mono(&[1, 1])];
        assert_eq!(eval_dictionary(&dict, &[2.0, 3.0]).unwrap(), vec![2.0, 3.0, 6.0]);
    }

    #[test]
    fn eval_dictionary_all_ones() {
        let dict = vec![
            mono(&[1, 0, 0]),
            mono(&[0, 1, 0]),
            mono(&[0, 0, 1]),
            mono(&[1, 1, 0]),
            mono(&[0, 1, 1]),
            mono(&[1, 0, 1]),
        ];
        assert_eq!(
            eval_dictionary(&dict, &[1.0, 1.0, 1.0]).unwrap(),
            vec![1.0; 6]
        );
    }

    #[test]
    fn eval_dictionary_planar() {
        // dict [x1, x2, x1x2, x1^2, x2^2] at (2,-1)
        let dict = vec![
            mono(&[1, 0]),
            mono(&[0, 1]),
            mono(&[1, 1]),
            mono(&[2, 0]),
            mono(&[0, 2]),
        ];
        assert_eq!(
            eval_dictionary(&dict, &[2.0, -1.0]).unwrap(),
            vec![2.0, -1.0, -2.0, 4.0, 1.0]
        );
    }

    #[test]
    fn eval_dictionary_dimension_mismatch() {
        let dict = vec![mono(&[1, 0])];
        assert!(eval_dictionary(&dict, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn factor_linear_dictionary_is_identity() {
        let dict = vec![mono(&[1, 0]), mono(&[0, 1])];
        let psi = factor_transformation(&dict, 2, None).unwrap();
        let id = PolynomialMatrix::identity(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                assert!(psi.get(i, j).approx_eq(id.get(i, j), 0.0));
            }
        }
    }

    #[test]
    fn factor_lowest_index_tiebreak() {
        // x1*x2 with n=2: divide by x1, giving the row [x2, 0]
        let dict = vec![mono(&[1, 1])];
        let psi = factor_transformation(&dict, 2, None).unwrap();
        assert!(psi
            .get(0, 0)
            .approx_eq(&Poly::from_monomial(mono(&[0, 1]), 1.0), 0.0));
        assert!(psi.get(0, 1).is_zero());
        // and the symbolic identity holds
        verify_factorization(&dict, &psi).unwrap();
    }

    #[test]
    fn factor_rejects_degree_zero() {
        let dict = vec![mono(&[0, 0])];
        assert!(matches!(
            factor_transformation(&dict, 2, None),
            Err(Error::DegreeZeroMonomial { index: 0 })
        ));
    }

    #[test]
    fn factor_accepts_valid_override() {
        // three-axis dictionary [x1,x2,x3,x1x2,x2x3,x1x3] with the
        // [I3; diag(x2,x3,x1)] stacked factorization
        let dict = vec![
            mono(&[1, 0, 0]),
            mono(&[0, 1, 0]),
            mono(&[0, 0, 1]),
            mono(&[1, 1, 0]),
            mono(&[0, 1, 1]),
            mono(&[1, 0, 1]),
        ];
        let mut ov = PolynomialMatrix::zeros(6, 3, 3);
        for i in 0..3 {
            ov.set(i, i, Poly::constant(3, 1.0));
        }
        ov.set(3, 0, Poly::var(3, 1)); // x1x2 = x2 * x1
        ov.set(4, 1, Poly::var(3, 2)); // x2x3 = x3 * x2
        ov.set(5, 2, Poly::var(3, 0)); // x1x3 = x1 * x3
        let psi = factor_transformation(&dict, 3, Some(ov.clone())).unwrap();
        assert_eq!(psi, ov);
    }

    #[test]
    fn factor_rejects_bad_override() {
        let dict = vec![mono(&[1, 0])];
        let mut bad = PolynomialMatrix::zeros(1, 2, 2);
        bad.set(0, 1, Poly::constant(2, 1.0)); // claims x1 = x2
        assert!(factor_transformation(&dict, 2, Some(bad)).is_err());
    }

    #[test]
    fn case_study_gram_matrix_eigs() {
        // printed quadratic-certificate matrix from the three-axis case study
        let p = SymMatrix::from_lower_rows(&[
            vec![1.5232],
            vec![0.1830, 1.0210],
            vec![-0.2349, 0.0435, 1.9255],
        ])
        .scale(1e6);
        let (eigs, _) = sym_eig(&p);
        let lo = eigs[0];
        let hi = eigs[2];
        assert!((lo - 9.4701e5).abs() / 9.4701e5 < 1e-3, "lo = {lo}");
        assert!((hi - 2.0351e6).abs() / 2.0351e6 < 1e-3, "hi = {hi}");
    }
}
