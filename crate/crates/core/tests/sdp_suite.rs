//! Solver validation: the analytic reference suite, determinism under
//! equality permutation, and randomly generated strictly feasible problems.

use clfnet_core::sdpsolve::{
    self, reference, SdpProblem, SolverConfig, Status, VarId,
};

#[test]
fn analytic_suite_to_closed_forms() {
    let cfg = SolverConfig::default();
    for case in reference::analytic_suite() {
        let sol = sdpsolve::solve(&case.problem, &cfg)
            .unwrap_or_else(|e| panic!("{}: {e}", case.name));
        match case.expected {
            reference::Expected::Objective(want) => {
                assert_eq!(sol.status, Status::Optimal, "{}", case.name);
                assert!(
                    (sol.objective - want).abs() <= 1e-7 * (1.0 + want.abs()),
                    "{}: objective {} vs {}",
                    case.name,
                    sol.objective,
                    want
                );
                assert!(
                    sol.duality_gap <= 1e-6 * (1.0 + sol.objective.abs()),
                    "{}: weak-duality witness violated ({})",
                    case.name,
                    sol.duality_gap
                );
            }
            reference::Expected::Infeasible => {
                assert!(
                    matches!(sol.status, Status::Infeasible(_)),
                    "{}: status {:?}",
                    case.name,
                    sol.status
                );
                assert!(sol.certificate.is_some(), "{}", case.name);
            }
        }
    }
}

#[test]
fn optimal_solutions_respect_reported_invariants() {
    let cfg = SolverConfig::default();
    for case in reference::analytic_suite() {
        let sol = sdpsolve::solve(&case.problem, &cfg).unwrap();
        if sol.status == Status::Optimal {
            let scale = case
                .problem
                .equalities
                .iter()
                .map(|(_, rhs)| rhs.abs())
                .fold(1.0_f64, f64::max);
            assert!(
                sol.max_eq_residual <= 10.0 * cfg.tol_eq * scale,
                "{}: residual {}",
                case.name,
                sol.max_eq_residual
            );
            assert!(
                sol.min_block_eig >= -cfg.tol_psd,
                "{}: min eig {}",
                case.name,
                sol.min_block_eig
            );
        }
    }
}

#[test]
fn permuting_equalities_changes_nothing() {
    for case in reference::analytic_suite() {
        if case.problem.equalities.len() < 2 {
            continue;
        }
        let cfg = SolverConfig::default();
        let a = sdpsolve::solve(&case.problem, &cfg).unwrap();
        let mut permuted = case.problem.clone();
        permuted.equalities.reverse();
        let b = sdpsolve::solve(&permuted, &cfg).unwrap();
        assert_eq!(a.status, b.status, "{}", case.name);
        if a.status == Status::Optimal {
            for (x, y) in a.free.iter().zip(&b.free) {
                assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()), "{}", case.name);
            }
            for (ba, bb) in a.blocks.iter().zip(&b.blocks) {
                for i in 0..ba.dim() {
                    for j in 0..=i {
                        let (x, y) = (ba.get(i, j), bb.get(i, j));
                        assert!(
                            (x - y).abs() <= 1e-8 * (1.0 + x.abs()),
                            "{}: block entry ({i},{j}) {x} vs {y}",
                            case.name
                        );
                    }
                }
            }
        }
    }
}

/// Deterministic pseudo-random strictly feasible problems: an interior point
/// is sampled first and the right-hand sides are built from it, so the margin
/// solve must succeed with a nonnegative margin.
#[test]
fn random_strictly_feasible_problems_solve() {
    let mut rng = 0x1234_5678_u64;
    let mut next = move || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    for trial in 0..8 {
        let dim = 2 + (trial % 3);
        let n_free = trial % 2;
        let mut p = SdpProblem::new(n_free, vec![dim]);
        // interior point: diagonally dominant PSD matrix
        let mut interior = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..=i {
                interior[i][j] = if i == j {
                    2.0 + next()
                } else {
                    0.3 * (next() - 0.5)
                };
            }
        }
        let free_vals: Vec<f64> = (0..n_free).map(|_| next() - 0.5).collect();
        for row in 0..(dim + n_free) {
            let mut expr = Vec::new();
            let mut rhs = 0.0;
            for i in 0..dim {
                for j in 0..=i {
                    if next() < 0.4 {
                        let c = next() - 0.5;
                        expr.push((
                            VarId::Entry {
                                block: 0,
                                row: i,
                                col: j,
                            },
                            c,
                        ));
                        rhs += c * interior[i][j];
                    }
                }
            }
            for (k, fv) in free_vals.iter().enumerate() {
                if next() < 0.5 {
                    let c = next() - 0.5;
                    expr.push((VarId::Free(k), c));
                    rhs += c * fv;
                }
            }
            if expr.is_empty() {
                expr.push((
                    VarId::Entry {
                        block: 0,
                        row: row % dim,
                        col: row % dim,
                    },
                    1.0,
                ));
                rhs = interior[row % dim][row % dim];
            }
            p.add_equality(expr, rhs);
        }
        p.margin_blocks = vec![0];
        let m = sdpsolve::solve_feasibility_with_margin(&p, &SolverConfig::default())
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert_eq!(m.solution.status, Status::Optimal, "trial {trial}");
        assert!(
            m.margin >= 0.0,
            "trial {trial}: margin {} for a strictly feasible problem",
            m.margin
        );
    }
}
