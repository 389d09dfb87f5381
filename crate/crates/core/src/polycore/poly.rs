use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::monomial::Monomial;

/// Scalar multivariate polynomial with 64-bit float coefficients, stored in
/// graded lexicographic term order with duplicate monomials merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    n_vars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero(n_vars: usize) -> Self {
        Poly {
            n_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_vars: usize, c: f64) -> Self {
        let mut p = Poly::zero(n_vars);
        p.add_term(Monomial::one(n_vars), c);
        p
    }

    pub fn from_monomial(m: Monomial, c: f64) -> Self {
        let mut p = Poly::zero(m.n_vars());
        p.add_term(m, c);
        p
    }

    pub fn var(n_vars: usize, idx: usize) -> Self {
        Poly::from_monomial(Monomial::var(n_vars, idx), 1.0)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        assert_eq!(m.n_vars(), self.n_vars, "monomial arity mismatch");
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                let v = e.get() + c;
                if v == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            Entry::Vacant(e) => {
                if c != 0.0 {
                    e.insert(c);
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.total_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(x)).sum()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        if s == 0.0 {
            return Poly::zero(self.n_vars);
        }
        Poly {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n_vars);
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    /// Coefficient-wise comparison against another polynomial.
    pub fn approx_eq(&self, other: &Poly, tol: f64) -> bool {
        let mut keys: Vec<&Monomial> = self.terms.keys().collect();
        keys.extend(other.terms.keys());
        keys.sort();
        keys.dedup();
        keys.iter()
            .all(|m| (self.coeff(m) - other.coeff(m)).abs() <= tol)
    }

    /// Human-readable rendering with a fixed number of significant digits,
    /// e.g. `-0.0097219*x1*x2 + 63.3713*x3`.
    pub fn format_terms(&self, sig_digits: usize) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        // highest-degree terms first, matching controller listings
        for (i, (m, &c)) in self.terms.iter().rev().enumerate() {
            let mag = format_sig(c.abs(), sig_digits);
            if i == 0 {
                if c < 0.0 {
                    s.push('-');
                }
            } else if c < 0.0 {
                s.push_str(" - ");
            } else {
                s.push_str(" + ");
            }
            if m.total_degree() == 0 {
                s.push_str(&mag);
            } else {
                s.push_str(&mag);
                s.push('*');
                s.push_str(&m.to_string());
            }
        }
        s
    }
}

fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    if exp.abs() >= 7 {
        format!("{:.*e}", sig - 1, v)
    } else {
        format!("{:.*}", decimals, v)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.format_terms(6))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_cancel() {
        let mut p = Poly::zero(2);
        p.add_term(Monomial::new(vec![1, 0]), 2.0);
        p.add_term(Monomial::new(vec![1, 0]), -2.0);
        assert!(p.is_zero());
    }

    #[test]
    fn mul_expands() {
        // (x1 + 1)(x1 - 1) = x1^2 - 1
        let mut a = Poly::var(1, 0);
        a.add_term(Monomial::one(1), 1.0);
        let mut b = Poly::var(1, 0);
        b.add_term(Monomial::one(1), -1.0);
        let p = a.mul(&b);
        assert_eq!(p.coeff(&Monomial::new(vec![2])), 1.0);
        assert_eq!(p.coeff(&Monomial::one(1)), -1.0);
        assert_eq!(p.coeff(&Monomial::new(vec![1])), 0.0);
    }

    #[test]
    fn eval_matches_terms() {
        let mut p = Poly::zero(2);
        p.add_term(Monomial::new(vec![1, 1]), 3.0);
        p.add_term(Monomial::one(2), -1.0);
        assert_eq!(p.eval(&[2.0, -1.0]), -7.0);
    }
}
