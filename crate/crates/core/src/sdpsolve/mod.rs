//! Self-contained semidefinite programming: standard-form problems over free
//! scalars and PSD blocks with linear equality constraints, solved by a
//! homogeneous self-dual interior-point method.

mod problem;
pub mod reference;
mod solver;

pub use problem::{
    InfeasibilityKind, LinExpr, MarginSolution, SdpProblem, SdpSolution, SolverConfig, Status,
    VarId,
};

use crate::error::Result;
use crate::polycore::SymMatrix;

/// Solve a standard-form SDP to the configured tolerances.
pub fn solve(problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution> {
    solver::solve_internal(problem, config)
}

/// Strict-feasibility solve: maximize a uniform margin `t` subscribed by the
/// problem's `margin_blocks` (each subscribed block `B` is required to
/// satisfy `B - t I` in the cone), clamped at `config.t_max`. Success means
/// the solve converged with `t* > 0`.
pub fn solve_feasibility_with_margin(
    problem: &SdpProblem,
    config: &SolverConfig,
) -> Result<MarginSolution> {
    problem.validate()?;
    let mut aug = problem.clone();
    let t_var = aug.n_free;
    aug.n_free += 1;
    let slack_block = aug.block_dims.len();
    aug.block_dims.push(1);

    // Substitute B = B' + t I inside every row that touches a subscribed
    // diagonal entry: the coefficient on the diagonal transfers to t.
    let is_subscribed = |b: usize| problem.margin_blocks.contains(&b);
    for (expr, _) in aug.equalities.iter_mut() {
        let mut t_coeff = 0.0;
        for (v, c) in expr.iter() {
            if let VarId::Entry { block, row, col } = v {
                if is_subscribed(*block) && row == col {
                    t_coeff += c;
                }
            }
        }
        if t_coeff != 0.0 {
            expr.push((VarId::Free(t_var), t_coeff));
        }
    }

    // clamp: t + slack = t_max
    aug.add_equality(
        vec![
            (VarId::Free(t_var), 1.0),
            (
                VarId::Entry {
                    block: slack_block,
                    row: 0,
                    col: 0,
                },
                1.0,
            ),
        ],
        config.t_max,
    );

    // maximize t
    aug.objective = vec![(VarId::Free(t_var), -1.0)];

    let mut solution = solve(&aug, config)?;

    let margin = if solution.status == Status::Optimal {
        solution.free[t_var]
    } else {
        f64::NEG_INFINITY
    };
    // rebuild the caller's view: drop the slack block and the t variable,
    // and shift the subscribed blocks back to B = B' + t I
    if solution.status == Status::Optimal {
        solution.blocks.truncate(problem.block_dims.len());
        for (b, block) in solution.blocks.iter_mut().enumerate() {
            if is_subscribed(b) {
                let dim = block.dim();
                *block = block.add(&SymMatrix::scaled_identity(dim, margin));
            }
        }
        solution.free.truncate(problem.n_free);
        solution.min_block_eig = solution
            .blocks
            .iter()
            .map(|b| b.min_eig())
            .fold(f64::INFINITY, f64::min);
    }

    let clamped =
        margin.is_finite() && (config.t_max - margin).abs() <= (1e-5 * config.t_max).max(1e-9);
    let feasible = solution.status == Status::Optimal && margin > 0.0;
    Ok(MarginSolution {
        solution,
        margin,
        clamped,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(block: usize, row: usize, col: usize) -> VarId {
        VarId::Entry { block, row, col }
    }

    #[test]
    fn min_x_subject_to_x_ge_one() {
        // min x s.t. x - 1 = B, B >= 0 (1x1)
        let mut p = SdpProblem::new(1, vec![1]);
        p.add_equality(vec![(VarId::Free(0), 1.0), (entry(0, 0, 0), -1.0)], 1.0);
        p.objective = vec![(VarId::Free(0), 1.0)];
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.free[0] - 1.0).abs() < 1e-7, "x = {}", sol.free[0]);
    }

    #[test]
    fn min_trace_completion() {
        // min tr(X), X 2x2 PSD, X11 = 1, X12 = 1  =>  X22 = 1, objective 2
        let mut p = SdpProblem::new(0, vec![2]);
        p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
        p.add_equality(vec![(entry(0, 1, 0), 1.0)], 1.0);
        p.objective = vec![(entry(0, 0, 0), 1.0), (entry(0, 1, 1), 1.0)];
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-6, "obj = {}", sol.objective);
        assert!((sol.blocks[0].get(1, 1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn margin_of_fixed_matrix() {
        // X fixed to [[2,1],[1,2]]: max t with X - tI PSD gives t = 1
        let mut p = SdpProblem::new(0, vec![2]);
        p.add_equality(vec![(entry(0, 0, 0), 1.0)], 2.0);
        p.add_equality(vec![(entry(0, 1, 1), 1.0)], 2.0);
        p.add_equality(vec![(entry(0, 1, 0), 1.0)], 1.0);
        p.margin_blocks = vec![0];
        let m = solve_feasibility_with_margin(&p, &SolverConfig::default()).unwrap();
        assert!(m.feasible);
        assert!((m.margin - 1.0).abs() < 1e-6, "t = {}", m.margin);
        // the returned block is the caller-facing X, margin included
        assert!((m.solution.blocks[0].get(0, 0) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_contradictory_equalities() {
        let mut p = SdpProblem::new(0, vec![1]);
        p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
        p.add_equality(vec![(entry(0, 0, 0), 1.0)], 2.0);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert!(matches!(sol.status, Status::Infeasible(InfeasibilityKind::Primal)));
        assert!(sol.certificate.is_some());
    }

    #[test]
    fn unbounded_margin_clamps() {
        // B >= tI with B = -X, X free: margin is unbounded, so the clamp binds
        let mut p = SdpProblem::new(1, vec![1]);
        p.add_equality(vec![(entry(0, 0, 0), 1.0), (VarId::Free(0), 1.0)], 0.0);
        p.margin_blocks = vec![0];
        let m = solve_feasibility_with_margin(&p, &SolverConfig::default()).unwrap();
        assert!(m.clamped, "margin should hit the clamp, got {}", m.margin);
        assert!((m.margin - 1e3).abs() < 1.0);
    }
}
