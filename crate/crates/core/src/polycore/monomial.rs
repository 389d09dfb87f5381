use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A monomial over a fixed state dimension, stored as one exponent per state
/// coordinate. `exponents = [1, 2]` is `x1 * x2^2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial { exponents }
    }

    /// The constant monomial `1` in `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial {
            exponents: vec![0; n],
        }
    }

    /// The variable `x_{idx+1}` in `n` variables.
    pub fn var(n: usize, idx: usize) -> Self {
        let mut e = vec![0; n];
        e[idx] = 1;
        Monomial { exponents: e }
    }

    pub fn n_vars(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.exponents.len());
        let mut p = 1.0;
        for (&e, &xi) in self.exponents.iter().zip(x) {
            for _ in 0..e {
                p *= xi;
            }
        }
        p
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        assert_eq!(self.exponents.len(), other.exponents.len());
        Monomial {
            exponents: self
                .exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Divide by the variable `idx`; `None` if its exponent is zero.
    pub fn div_var(&self, idx: usize) -> Option<Monomial> {
        if self.exponents[idx] == 0 {
            return None;
        }
        let mut e = self.exponents.clone();
        e[idx] -= 1;
        Some(Monomial { exponents: e })
    }
}

/// Graded lexicographic order: by total degree first, then lexicographically
/// on the exponent vector. This is the canonical order for Gram bases and
/// report output.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exponents.cmp(&other.exponents))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.total_degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exponents.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables with total degree in `0..=max_degree`,
/// in graded lexicographic order.
pub fn graded_basis(n: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut current = vec![Monomial::one(n)];
    out.extend(current.iter().cloned());
    for _deg in 1..=max_degree {
        let mut next: Vec<Monomial> = Vec::new();
        for m in &current {
            for v in 0..n {
                let mut e = m.exponents().to_vec();
                e[v] += 1;
                let cand = Monomial::new(e);
                if !next.contains(&cand) {
                    next.push(cand);
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        current = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_forms() {
        assert_eq!(Monomial::new(vec![0, 0]).to_string(), "1");
        assert_eq!(Monomial::new(vec![1, 2]).to_string(), "x1*x2^2");
    }

    #[test]
    fn graded_basis_counts() {
        // (n + d choose d) monomials up to degree d
        assert_eq!(graded_basis(2, 2).len(), 6);
        assert_eq!(graded_basis(3, 1).len(), 4);
        assert_eq!(graded_basis(3, 2).len(), 10);
    }

    #[test]
    fn grlex_ordering() {
        let b = graded_basis(2, 2);
        assert_eq!(b[0], Monomial::one(2));
        for w in b.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
}
