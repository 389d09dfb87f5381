//! Reference problems with closed-form optima, used to validate solver
//! builds. Each expected value comes from hand arithmetic on the stated
//! problem (Schur complements and 2x2 eigenvalue formulas), not from the
//! solver itself.

use super::problem::{SdpProblem, VarId};

fn entry(block: usize, row: usize, col: usize) -> VarId {
    VarId::Entry { block, row, col }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    /// Optimal with the stated objective value.
    Objective(f64),
    /// Provably infeasible; the solver must certify it.
    Infeasible,
}

pub struct ReferenceProblem {
    pub name: &'static str,
    pub problem: SdpProblem,
    pub expected: Expected,
}

/// The analytic validation suite.
pub fn analytic_suite() -> Vec<ReferenceProblem> {
    let mut suite = Vec::new();

    // 1. min x s.t. x >= 1
    let mut p = SdpProblem::new(1, vec![1]);
    p.add_equality(vec![(VarId::Free(0), 1.0), (entry(0, 0, 0), -1.0)], 1.0);
    p.objective = vec![(VarId::Free(0), 1.0)];
    suite.push(ReferenceProblem {
        name: "scalar lower bound",
        problem: p,
        expected: Expected::Objective(1.0),
    });

    // 2. min tr(X), X11 = 1, X12 = 1: X22 >= X12^2/X11 = 1, objective 2
    let mut p = SdpProblem::new(0, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 0), 1.0)], 1.0);
    p.objective = vec![(entry(0, 0, 0), 1.0), (entry(0, 1, 1), 1.0)];
    suite.push(ReferenceProblem {
        name: "trace completion",
        problem: p,
        expected: Expected::Objective(2.0),
    });

    // 3. LP as diagonal blocks: min x1 + 2 x2, x1 + x2 = 1, x >= 0
    let mut p = SdpProblem::new(0, vec![1, 1]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0), (entry(1, 0, 0), 1.0)], 1.0);
    p.objective = vec![(entry(0, 0, 0), 1.0), (entry(1, 0, 0), 2.0)];
    suite.push(ReferenceProblem {
        name: "two-variable linear program",
        problem: p,
        expected: Expected::Objective(1.0),
    });

    // 4. largest eigenvalue: min t s.t. tI - A >= 0, A = [[2,1],[1,2]]
    let mut p = SdpProblem::new(1, vec![2]);
    for (i, j, a) in [(0, 0, 2.0), (1, 1, 2.0), (1, 0, 1.0)] {
        p.add_equality(
            vec![(entry(0, i, j), 1.0), (VarId::Free(0), if i == j { -1.0 } else { 0.0 })],
            -a,
        );
    }
    p.objective = vec![(VarId::Free(0), 1.0)];
    suite.push(ReferenceProblem {
        name: "largest eigenvalue of [[2,1],[1,2]]",
        problem: p,
        expected: Expected::Objective(3.0),
    });

    // 5. matrix completion: min X22 s.t. X11 = 4, X12 = 2: X22 = 1
    let mut p = SdpProblem::new(0, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 4.0);
    p.add_equality(vec![(entry(0, 1, 0), 1.0)], 2.0);
    p.objective = vec![(entry(0, 1, 1), 1.0)];
    suite.push(ReferenceProblem {
        name: "Schur completion",
        problem: p,
        expected: Expected::Objective(1.0),
    });

    // 6. min x with [[1, x],[x, 1]] >= 0: x = -1
    let mut p = SdpProblem::new(1, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 1), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 0), 1.0), (VarId::Free(0), -1.0)], 0.0);
    p.objective = vec![(VarId::Free(0), 1.0)];
    suite.push(ReferenceProblem {
        name: "correlation bound",
        problem: p,
        expected: Expected::Objective(-1.0),
    });

    // 7. min <C, X>, tr X = 1, C = diag(1, 3): lambda_min(C) = 1
    let mut p = SdpProblem::new(0, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0), (entry(0, 1, 1), 1.0)], 1.0);
    p.objective = vec![(entry(0, 0, 0), 1.0), (entry(0, 1, 1), 3.0)];
    suite.push(ReferenceProblem {
        name: "smallest eigenvalue via trace normalization",
        problem: p,
        expected: Expected::Objective(1.0),
    });

    // 8. same with C = [[2,1],[1,2]]: lambda_min = 1
    let mut p = SdpProblem::new(0, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0), (entry(0, 1, 1), 1.0)], 1.0);
    p.objective = vec![
        (entry(0, 0, 0), 2.0),
        (entry(0, 1, 1), 2.0),
        (entry(0, 1, 0), 2.0),
    ];
    suite.push(ReferenceProblem {
        name: "smallest eigenvalue, coupled",
        problem: p,
        expected: Expected::Objective(1.0),
    });

    // 9. 3x3 completion: min tr X, X11 = X22 = 1, X13 = 1, X23 = 1.
    // X33 >= (X13, X23) [X11 X12; X12 X22]^{-1} (X13; X23); minimized at
    // X12 -> 1 giving X33 >= 1... with X12 free the infimum of
    // x33 = (2 - 2 x12)/(1 - x12^2) = 2/(1 + x12) -> 1 as x12 -> 1.
    // objective infimum = 1 + 1 + 1 = 3.
    let mut p = SdpProblem::new(0, vec![3]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 1), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 2, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 2, 1), 1.0)], 1.0);
    p.objective = vec![
        (entry(0, 0, 0), 1.0),
        (entry(0, 1, 1), 1.0),
        (entry(0, 2, 2), 1.0),
    ];
    suite.push(ReferenceProblem {
        name: "3x3 completion infimum",
        problem: p,
        expected: Expected::Objective(3.0),
    });

    // 10. two coupled blocks: min a + b with a >= 2, b >= 3 as 1x1 blocks
    // tied through free variables.
    let mut p = SdpProblem::new(2, vec![1, 1]);
    p.add_equality(vec![(VarId::Free(0), 1.0), (entry(0, 0, 0), -1.0)], 2.0);
    p.add_equality(vec![(VarId::Free(1), 1.0), (entry(1, 0, 0), -1.0)], 3.0);
    p.objective = vec![(VarId::Free(0), 1.0), (VarId::Free(1), 1.0)];
    suite.push(ReferenceProblem {
        name: "independent bounds",
        problem: p,
        expected: Expected::Objective(5.0),
    });

    // 11. infeasible: 1x1 block pinned negative
    let mut p = SdpProblem::new(0, vec![1]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], -1.0);
    p.objective = vec![(entry(0, 0, 0), 1.0)];
    suite.push(ReferenceProblem {
        name: "negative diagonal pin",
        problem: p,
        expected: Expected::Infeasible,
    });

    // 12. infeasible: contradictory equalities
    let mut p = SdpProblem::new(0, vec![1]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 2.0);
    suite.push(ReferenceProblem {
        name: "contradictory equalities",
        problem: p,
        expected: Expected::Infeasible,
    });

    // 13. infeasible 2x2: X11 = 1, X22 = 1, X12 = 3 violates PSD-ness
    let mut p = SdpProblem::new(0, vec![2]);
    p.add_equality(vec![(entry(0, 0, 0), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 1), 1.0)], 1.0);
    p.add_equality(vec![(entry(0, 1, 0), 1.0)], 3.0);
    suite.push(ReferenceProblem {
        name: "off-diagonal dominance",
        problem: p,
        expected: Expected::Infeasible,
    });

    suite
}
