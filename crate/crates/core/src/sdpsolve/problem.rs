use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::SymMatrix;

/// A decision variable: either an unconstrained scalar or an entry of a PSD
/// block (lower triangle, `row >= col`). A coefficient on an off-diagonal
/// entry multiplies the matrix entry itself; the symmetric copy is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarId {
    Free(usize),
    Entry {
        block: usize,
        row: usize,
        col: usize,
    },
}

/// Sparse linear functional over the declared variables.
pub type LinExpr = Vec<(VarId, f64)>;

/// Standard-form semidefinite program: minimize a linear objective over free
/// scalars and PSD blocks subject to linear equalities.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SdpProblem {
    pub n_free: usize,
    pub block_dims: Vec<usize>,
    /// Minimized. Empty means a pure feasibility problem.
    pub objective: LinExpr,
    /// `expr == rhs` rows.
    pub equalities: Vec<(LinExpr, f64)>,
    /// Blocks subscribed to the uniform margin when solved through
    /// [`crate::sdpsolve::solve_feasibility_with_margin`]; ignored by plain
    /// `solve`.
    pub margin_blocks: Vec<usize>,
}

impl SdpProblem {
    pub fn new(n_free: usize, block_dims: Vec<usize>) -> Self {
        SdpProblem {
            n_free,
            block_dims,
            ..Default::default()
        }
    }

    pub fn add_equality(&mut self, expr: LinExpr, rhs: f64) {
        self.equalities.push((expr, rhs));
    }

    fn check_var(&self, v: &VarId) -> Result<()> {
        match *v {
            VarId::Free(k) => {
                if k >= self.n_free {
                    return Err(Error::InvalidProblem(format!(
                        "free variable {k} out of range ({} declared)",
                        self.n_free
                    )));
                }
            }
            VarId::Entry { block, row, col } => {
                let dim = *self.block_dims.get(block).ok_or_else(|| {
                    Error::InvalidProblem(format!("block {block} not declared"))
                })?;
                if row >= dim || col > row {
                    return Err(Error::InvalidProblem(format!(
                        "entry ({row},{col}) invalid for block {block} of dimension {dim}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidProblem("zero-dimensional PSD block".into()));
        }
        if self.n_free == 0 && self.block_dims.is_empty() {
            return Err(Error::InvalidProblem("problem has no variables".into()));
        }
        if self.block_dims.is_empty() {
            return Err(Error::InvalidProblem(
                "interior-point solver needs at least one PSD block".into(),
            ));
        }
        if self.equalities.is_empty() && self.n_free > 0 {
            return Err(Error::InvalidProblem(
                "free variables without equality constraints are unbounded".into(),
            ));
        }
        for (expr, _) in &self.equalities {
            for (v, _) in expr {
                self.check_var(v)?;
            }
        }
        for (v, _) in &self.objective {
            self.check_var(v)?;
        }
        for &b in &self.margin_blocks {
            if b >= self.block_dims.len() {
                return Err(Error::InvalidProblem(format!(
                    "margin block {b} not declared"
                )));
            }
        }
        Ok(())
    }

    /// Plain-text sparse dump for external cross-checking: a header with the
    /// block sizes, then one triplet per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("free {}\n", self.n_free));
        s.push_str("blocks");
        for d in &self.block_dims {
            s.push_str(&format!(" {d}"));
        }
        s.push('\n');
        let fmt_var = |v: &VarId| match v {
            VarId::Free(k) => format!("f{k}"),
            VarId::Entry { block, row, col } => format!("b{block}:{row},{col}"),
        };
        for (v, c) in &self.objective {
            s.push_str(&format!("obj {} {:.17e}\n", fmt_var(v), c));
        }
        for (i, (expr, rhs)) in self.equalities.iter().enumerate() {
            for (v, c) in expr {
                s.push_str(&format!("eq{i} {} {:.17e}\n", fmt_var(v), c));
            }
            s.push_str(&format!("rhs{i} {:.17e}\n", rhs));
        }
        s
    }
}

/// Solver configuration. Tolerances are relative to the problem scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_eq: f64,
    pub tol_psd: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
    /// Clamp for the uniform margin in feasibility-with-margin solves.
    pub t_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_eq: 1e-8,
            tol_psd: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
            t_max: 1e3,
        }
    }
}

/// Which ray certified infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfeasibilityKind {
    /// Dual improving ray: the equalities are inconsistent with the cone.
    Primal,
    /// Primal improving ray: the objective is unbounded below.
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible(InfeasibilityKind),
    MaxIterations,
}

/// Certified solution of a semidefinite program.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: Status,
    pub free: Vec<f64>,
    pub blocks: Vec<SymMatrix>,
    pub objective: f64,
    /// Largest absolute equality residual.
    pub max_eq_residual: f64,
    /// Smallest eigenvalue over all PSD blocks.
    pub min_block_eig: f64,
    /// `|primal - dual|` objective gap at the reported point.
    pub duality_gap: f64,
    pub iterations: usize,
    /// Dual multipliers for the equality rows.
    pub duals: Vec<f64>,
    /// Certificate direction when status is `Infeasible`: the dual ray `y`
    /// for primal infeasibility, the primal ray `x` otherwise.
    pub certificate: Option<Vec<f64>>,
}

/// Outcome of a feasibility-with-margin solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginSolution {
    pub solution: SdpSolution,
    /// Achieved uniform margin `t*`.
    pub margin: f64,
    /// The margin ran into the configured clamp `t_max`.
    pub clamped: bool,
    /// `t* > 0` and the solve converged.
    pub feasible: bool,
}
