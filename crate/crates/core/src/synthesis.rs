//! Compiles the data-driven matrix-inequality condition into a
//! sum-of-squares semidefinite program, recovers the Lyapunov matrix,
//! controller, and ISS constants from its solution, and certifies the result
//! against the true dynamics in harness mode.
//!
//! The decision variables are the inverse Lyapunov matrix `Phi = P^{-1}`
//! (PSD block, margin-subscribed), the controller coefficient polynomials
//! `K(x)` (free scalars), and the Gram matrix of the multiplier polynomial
//! `gamma(x)` (PSD block). The negated condition matrix
//!
//! ```text
//!   S(x) = -( H(x) + (vartheta + kappa) P_blk - gamma(x) Z )
//! ```
//!
//! is certified pointwise nonnegative through a matrix sum-of-squares
//! expansion `S(x) = (I (x) m(x))^T G (I (x) m(x))` with `G` PSD
//! (margin-subscribed), matched coefficient by coefficient through linear
//! equalities. Everything is affine in the decision variables; the strict
//! inequality of the design condition is realized as margin maximization.

use serde::{Deserialize, Serialize};

use crate::datagen::{self, streams, DataMatrices, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::network::SubsystemClass;
use crate::polycore::{
    graded_basis, spectral_norm, sym_eig, Mat, Monomial, Poly, PolynomialMatrix, SymMatrix,
};
use crate::sdpsolve::{self, MarginSolution, SdpProblem, SolverConfig, VarId};

/// Which interconnection information backs the consistency matrix.
#[derive(Debug, Clone)]
pub enum SynthesisMode {
    /// Interconnection matrix unknown; only a spectral-norm bound is
    /// available. Carries the full consistency matrix over `[J; G; W]`.
    UnknownInterconnection {
        varkappa: f64,
        z: SymMatrix,
        sigma: usize,
    },
    /// Interconnection matrix known exactly; the consistency matrix is built
    /// on the compensated derivatives and the reduced stack `[J; G]`.
    KnownInterconnection { d: Mat, y: SymMatrix },
}

/// Everything the condition compiler needs for one subsystem class.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub n: usize,
    pub m: usize,
    pub dict_f: Vec<Monomial>,
    pub dict_g: PolynomialMatrix,
    pub psi: PolynomialMatrix,
    pub kappa: f64,
    pub vartheta: f64,
    pub mode: SynthesisMode,
    /// Maximum total degree of the controller coefficient matrix `K(x)`.
    pub deg_k: u32,
    /// Total degree of the multiplier `gamma(x)`; must be even (0 means a
    /// constant nonnegative multiplier).
    pub deg_gamma: u32,
    /// Half-degree of the sum-of-squares basis; defaults to half the
    /// condition-matrix degree, rounded up.
    pub gram_degree: Option<u32>,
}

impl SynthesisProblem {
    /// Assemble the unknown-interconnection problem from a record.
    pub fn unknown_interconnection(
        class: &SubsystemClass,
        record: &TrajectoryRecord,
        data: &DataMatrices,
        psi: PolynomialMatrix,
        deg_k: u32,
        deg_gamma: u32,
    ) -> Result<Self> {
        let varkappa = class.varkappa.ok_or_else(|| {
            Error::InvalidProblem("unknown-interconnection mode needs a norm bound".into())
        })?;
        let z = datagen::assemble_z(&record.xd, &data.q, &record.lambda_sq);
        Ok(SynthesisProblem {
            n: class.n,
            m: class.m,
            dict_f: class.dict_f.clone(),
            dict_g: class.dict_g.clone(),
            psi,
            kappa: class.kappa,
            vartheta: class.vartheta,
            mode: SynthesisMode::UnknownInterconnection {
                varkappa,
                z,
                sigma: record.w.rows(),
            },
            deg_k,
            deg_gamma,
            gram_degree: None,
        })
    }

    /// Assemble the known-interconnection problem from a record.
    pub fn known_interconnection(
        class: &SubsystemClass,
        record: &TrajectoryRecord,
        data: &DataMatrices,
        psi: PolynomialMatrix,
        d: Mat,
        deg_k: u32,
        deg_gamma: u32,
    ) -> Result<Self> {
        let y = datagen::assemble_y(&record.xd, &d, &record.w, &data.l, &record.lambda_sq);
        Ok(SynthesisProblem {
            n: class.n,
            m: class.m,
            dict_f: class.dict_f.clone(),
            dict_g: class.dict_g.clone(),
            psi,
            kappa: class.kappa,
            vartheta: class.vartheta,
            mode: SynthesisMode::KnownInterconnection { d, y },
            deg_k,
            deg_gamma,
            gram_degree: None,
        })
    }

    fn consistency(&self) -> &SymMatrix {
        match &self.mode {
            SynthesisMode::UnknownInterconnection { z, .. } => z,
            SynthesisMode::KnownInterconnection { y, .. } => y,
        }
    }

    /// Rows of the stacked off-diagonal block: `N + M + sigma` in the
    /// unknown-interconnection route, `N + M` otherwise.
    fn stack_rows(&self) -> usize {
        match &self.mode {
            SynthesisMode::UnknownInterconnection { sigma, .. } => {
                self.dict_f.len() + self.dict_g.rows() + sigma
            }
            SynthesisMode::KnownInterconnection { .. } => self.dict_f.len() + self.dict_g.rows(),
        }
    }

    /// Dimension of the condition matrix.
    pub fn condition_dim(&self) -> usize {
        self.n + self.stack_rows()
    }
}

/// Linear expression plus constant, over the compiled SDP's variables.
#[derive(Debug, Clone, Default)]
struct Affine {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl Affine {
    fn push(&mut self, v: VarId, c: f64) {
        if c == 0.0 {
            return;
        }
        if let Some(slot) = self.terms.iter_mut().find(|(id, _)| *id == v) {
            slot.1 += c;
        } else {
            self.terms.push((v, c));
        }
    }
}

const PHI_BLOCK: usize = 0;
const GRAM_BLOCK: usize = 1;
const GAMMA_BLOCK: usize = 2;

/// Fixed positive floor substituted into the inverse Lyapunov matrix
/// (`Phi = Phi' + PHI_FLOOR * I` with `Phi'` the PSD decision block), so the
/// uniform margin measures only the condition matrix. With the trace pinned
/// at `n`, the floor is six orders below the block scale.
const PHI_FLOOR: f64 = 1e-6;

/// Compiled condition: the SDP plus the variable maps needed for recovery.
pub struct CompiledCondition {
    pub sdp: SdpProblem,
    pub condition_dim: usize,
    pub gram_basis: Vec<Monomial>,
    pub basis_k: Vec<Monomial>,
    pub basis_gamma: Vec<Monomial>,
}

fn phi_var(w: usize, i: usize) -> VarId {
    VarId::Entry {
        block: PHI_BLOCK,
        row: w.max(i),
        col: w.min(i),
    }
}

type EntryMap = std::collections::BTreeMap<Monomial, Affine>;

/// Compile the data-driven condition into a standard-form SDP.
///
/// Fails when the requested Gram basis cannot express the condition matrix's
/// degree.
pub fn compile_condition(problem: &SynthesisProblem) -> Result<CompiledCondition> {
    let n = problem.n;
    let m = problem.m;
    let big_n = problem.dict_f.len();
    let big_m = problem.dict_g.rows();
    let d_c = problem.condition_dim();
    let zd = problem.consistency();
    if zd.dim() != d_c {
        return Err(Error::DimensionMismatch(format!(
            "consistency matrix has dimension {} but the condition needs {d_c}",
            zd.dim(),
        )));
    }
    if problem.psi.rows() != big_n || problem.psi.cols() != n {
        return Err(Error::DimensionMismatch(
            "transformation matrix shape does not match the dictionary".into(),
        ));
    }
    if problem.dict_g.cols() != m {
        return Err(Error::DimensionMismatch(
            "input dictionary width does not match the input dimension".into(),
        ));
    }
    if problem.deg_gamma % 2 != 0 {
        return Err(Error::InvalidProblem(
            "the multiplier degree must be even (it is certified as a square form)".into(),
        ));
    }

    let basis_k = graded_basis(n, problem.deg_k);
    let basis_gamma = graded_basis(n, problem.deg_gamma / 2);
    let q_gamma = basis_gamma.len();
    let n_k_vars = m * n * basis_k.len();
    let k_var = |u: usize, v: usize, b: usize| VarId::Free((u * n + v) * basis_k.len() + b);

    // Symbolic condition matrix: per (i <= j) entry, per monomial, an affine
    // expression in the decision variables.
    let ent = |i: usize, j: usize| -> usize { j * (j + 1) / 2 + i };
    let mut entries: Vec<EntryMap> = vec![Default::default(); d_c * (d_c + 1) / 2];
    let add = |entries: &mut Vec<EntryMap>, i: usize, j: usize, mono: Monomial, v: VarId, c: f64| {
        let (i, j) = (i.min(j), i.max(j));
        let aff = entries[ent(i, j)].entry(mono).or_default();
        aff.push(v, c);
        // the Phi floor substitution adds a constant along the diagonal
        if let VarId::Entry {
            block: PHI_BLOCK,
            row,
            col,
        } = v
        {
            if row == col {
                aff.constant += c * PHI_FLOOR;
            }
        }
    };

    // -(vartheta + kappa) * Phi in the top-left block
    let vk = problem.vartheta + problem.kappa;
    for i in 0..n {
        for j in i..n {
            add(&mut entries, i, j, Monomial::one(n), phi_var(i, j), -vk);
        }
    }

    // off-diagonal stack: S[i][n+p] = -stack[p][i] + multiplier part
    // drift rows: (Psi Phi)[p][i] = sum_w Psi[p][w] Phi[w][i]
    for p in 0..big_n {
        for i in 0..n {
            for w in 0..n {
                for (mono, c) in problem.psi.get(p, w).terms() {
                    add(&mut entries, i, n + p, mono.clone(), phi_var(w, i), -c);
                }
            }
        }
    }
    // input rows: (G K)[p][i] = sum_u G[p][u](x) K[u][i](x)
    for p in 0..big_m {
        for i in 0..n {
            for u in 0..m {
                for (mono_g, cg) in problem.dict_g.get(p, u).terms() {
                    for (b, beta) in basis_k.iter().enumerate() {
                        add(
                            &mut entries,
                            i,
                            n + big_n + p,
                            mono_g.mul(beta),
                            k_var(u, i, b),
                            -cg,
                        );
                    }
                }
            }
        }
    }
    // remaining stack rows (the neighbour block) contribute nothing

    // + gamma(x) * Zd everywhere
    for a in 0..q_gamma {
        for b in 0..=a {
            let mult = if a == b { 1.0 } else { 2.0 };
            let mono = basis_gamma[a].mul(&basis_gamma[b]);
            let gv = VarId::Entry {
                block: GAMMA_BLOCK,
                row: a,
                col: b,
            };
            for i in 0..d_c {
                for j in i..d_c {
                    let zij = zd.get(i, j);
                    if zij != 0.0 {
                        add(&mut entries, i, j, mono.clone(), gv, mult * zij);
                    }
                }
            }
        }
    }

    // degree bookkeeping
    let mut max_deg = 0u32;
    for e in &entries {
        for (mono, aff) in e {
            if !aff.terms.is_empty() || aff.constant != 0.0 {
                max_deg = max_deg.max(mono.total_degree());
            }
        }
    }
    let gram_degree = problem.gram_degree.unwrap_or(max_deg.div_ceil(2));
    if 2 * gram_degree < max_deg {
        return Err(Error::BasisTooSmall {
            required: max_deg as usize,
            available: (2 * gram_degree) as usize,
        });
    }
    let gram_basis = graded_basis(n, gram_degree);
    let q = gram_basis.len();

    let mut sdp = SdpProblem::new(n_k_vars, vec![n, d_c * q, q_gamma]);
    sdp.margin_blocks = vec![GRAM_BLOCK];

    // normalization: the feasible set is a cone, so pin trace(Phi) = n
    let trace_expr: Vec<(VarId, f64)> = (0..n).map(|i| (phi_var(i, i), 1.0)).collect();
    sdp.add_equality(trace_expr, n as f64 * (1.0 - PHI_FLOOR));

    // coefficient matching between S and the Gram expansion
    let match_basis = graded_basis(n, 2 * gram_degree);
    let mut pairs_by_mono: std::collections::BTreeMap<Monomial, Vec<(usize, usize)>> =
        Default::default();
    for a in 0..q {
        for b in 0..q {
            pairs_by_mono
                .entry(gram_basis[a].mul(&gram_basis[b]))
                .or_default()
                .push((a, b));
        }
    }
    for i in 0..d_c {
        for j in i..d_c {
            let sym = &entries[ent(i, j)];
            for alpha in &match_basis {
                let mut expr: Vec<(VarId, f64)> = Vec::new();
                let mut rhs = 0.0;
                let pairs = pairs_by_mono.get(alpha);
                if pairs.is_none() && sym.get(alpha).is_none() {
                    continue;
                }
                if let Some(pairs) = pairs {
                    let mut acc: std::collections::BTreeMap<(usize, usize), f64> =
                        Default::default();
                    for &(a, b) in pairs {
                        let (gi, gj) = (i * q + a, j * q + b);
                        let key = (gi.max(gj), gi.min(gj));
                        *acc.entry(key).or_default() += 1.0;
                    }
                    for ((r, c), coeff) in acc {
                        expr.push((
                            VarId::Entry {
                                block: GRAM_BLOCK,
                                row: r,
                                col: c,
                            },
                            coeff,
                        ));
                    }
                }
                if let Some(aff) = sym.get(alpha) {
                    for (v, c) in &aff.terms {
                        expr.push((*v, -c));
                    }
                    rhs = aff.constant;
                }
                sdp.add_equality(expr, rhs);
            }
        }
    }

    Ok(CompiledCondition {
        sdp,
        condition_dim: d_c,
        gram_basis,
        basis_k,
        basis_gamma,
    })
}

/// The synthesized certificate: Lyapunov matrix, controller, multiplier,
/// and the ISS constants handed to the composition stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub phi: SymMatrix,
    pub p: SymMatrix,
    /// Controller coefficient matrix: the feedback is `u = K(x) P x`.
    pub k: PolynomialMatrix,
    /// Nonnegative multiplier polynomial.
    pub gamma: Poly,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub rho: f64,
    pub kappa: f64,
    pub vartheta: f64,
    /// Achieved uniform margin of the strict-feasibility solve.
    pub margin: f64,
}

impl SynthesisResult {
    pub fn controller(&self, x: &[f64]) -> Vec<f64> {
        datagen::feedback_input(&self.k, &self.p, x)
    }

    pub fn lyapunov(&self, x: &[f64]) -> f64 {
        let px = self.p.matvec(x);
        x.iter().zip(&px).map(|(a, b)| a * b).sum()
    }
}

/// ISS input gain from the Lyapunov scale and the interconnection norm
/// bound: `lambda_max(P) * bound^2 / vartheta`.
pub fn rho_from_bound(lambda_max: f64, norm_bound: f64, vartheta: f64) -> f64 {
    lambda_max * norm_bound * norm_bound / vartheta
}

/// Margin below which a solve is treated as infeasible-in-practice.
pub const MARGIN_ACCEPT: f64 = 1e-7;

/// Recover the certificate from a margin solution of the compiled SDP.
pub fn recover(
    problem: &SynthesisProblem,
    compiled: &CompiledCondition,
    margin_sol: &MarginSolution,
) -> Result<SynthesisResult> {
    if !margin_sol.feasible || margin_sol.margin < MARGIN_ACCEPT {
        return Err(Error::Recovery(format!(
            "no strictly feasible certificate: margin {:.3e}",
            margin_sol.margin
        )));
    }
    let sol = &margin_sol.solution;
    let n_phi = sol.blocks[PHI_BLOCK].dim();
    let phi = sol.blocks[PHI_BLOCK].add(&SymMatrix::scaled_identity(n_phi, PHI_FLOOR));
    let p = phi.inverse_spd(1e12)?;
    let (eigs, _) = sym_eig(&p);
    let alpha_lo = eigs[0];
    let alpha_hi = eigs[eigs.len() - 1];

    let n = problem.n;
    let m = problem.m;
    let mut k = PolynomialMatrix::zeros(m, n, n);
    for u in 0..m {
        for v in 0..n {
            let mut poly = Poly::zero(n);
            for (b, beta) in compiled.basis_k.iter().enumerate() {
                let idx = (u * n + v) * compiled.basis_k.len() + b;
                let c = sol.free[idx];
                if c != 0.0 {
                    poly.add_term(beta.clone(), c);
                }
            }
            k.set(u, v, poly);
        }
    }

    let g_gamma = &sol.blocks[GAMMA_BLOCK];
    let mut gamma = Poly::zero(n);
    for a in 0..compiled.basis_gamma.len() {
        for b in 0..compiled.basis_gamma.len() {
            let c = g_gamma.get(a, b);
            if c != 0.0 {
                gamma.add_term(compiled.basis_gamma[a].mul(&compiled.basis_gamma[b]), c);
            }
        }
    }

    let rho = match &problem.mode {
        SynthesisMode::UnknownInterconnection { varkappa, .. } => {
            rho_from_bound(alpha_hi, *varkappa, problem.vartheta)
        }
        SynthesisMode::KnownInterconnection { d, .. } => {
            rho_from_bound(alpha_hi, spectral_norm(d), problem.vartheta)
        }
    };

    Ok(SynthesisResult {
        phi,
        p,
        k,
        gamma,
        alpha_lo,
        alpha_hi,
        rho,
        kappa: problem.kappa,
        vartheta: problem.vartheta,
        margin: margin_sol.margin,
    })
}

/// Compile, solve with margin maximization, and recover in one call.
///
/// The margin clamp is tied to the data scale: maximizing the margin all the
/// way out drags the multiplier and Gram coordinates to the extreme end of
/// the feasible cone, which conditions the solve badly for no benefit — any
/// strictly positive margin certifies the condition.
pub fn solve_synthesis(
    problem: &SynthesisProblem,
    config: &SolverConfig,
) -> Result<(SynthesisResult, MarginSolution)> {
    let compiled = compile_condition(problem)?;
    let zd = problem.consistency();
    let mut scale = 0.0_f64;
    for i in 0..zd.dim() {
        for j in 0..=i {
            scale = scale.max(zd.get(i, j).abs());
        }
    }
    let mut cfg = *config;
    cfg.t_max = (1e-5 * scale).clamp(1e-6, config.t_max);
    let margin_sol = sdpsolve::solve_feasibility_with_margin(&compiled.sdp, &cfg)?;
    let result = recover(problem, &compiled, &margin_sol)?;
    Ok((result, margin_sol))
}

/// Numeric condition matrix `S(x)` for given certificate values; the
/// compiled SDP constrains exactly this matrix to be a square form.
pub fn condition_matrix(
    problem: &SynthesisProblem,
    phi: &SymMatrix,
    k: &PolynomialMatrix,
    gamma: &Poly,
    x: &[f64],
) -> SymMatrix {
    let n = problem.n;
    let big_n = problem.dict_f.len();
    let big_m = problem.dict_g.rows();
    let s_rows = problem.stack_rows();
    let d_c = problem.condition_dim();
    let zd = problem.consistency();
    let vk = problem.vartheta + problem.kappa;
    let gamma_x = gamma.eval(x);

    let phi_d = phi.to_dense();
    let psi_phi = problem.psi.eval(x).matmul(&phi_d);
    let gk = problem.dict_g.eval(x).matmul(&k.eval(x));

    let mut s = Mat::zeros(d_c, d_c);
    for i in 0..d_c {
        for j in 0..d_c {
            s.set(i, j, gamma_x * zd.get(i, j));
        }
    }
    for i in 0..n {
        for j in 0..n {
            s.add_at(i, j, -vk * phi_d.get(i, j));
        }
    }
    for p in 0..s_rows {
        for i in 0..n {
            let v = if p < big_n {
                psi_phi.get(p, i)
            } else if p < big_n + big_m {
                gk.get(p - big_n, i)
            } else {
                0.0
            };
            s.add_at(i, n + p, -v);
            s.add_at(n + p, i, -v);
        }
    }
    SymMatrix::from_dense(&s)
}

/// Grid report from [`verify_sos_residual`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SosGridReport {
    /// Worst eigenvalue of the condition matrix over the grid.
    pub min_eig: f64,
    /// Worst eigenvalue normalized by the local matrix size.
    pub min_eig_rel: f64,
    pub points: usize,
    pub pass: bool,
}

/// Evaluate the condition matrix on a uniform grid in the infinity-ball of
/// the given radius and report the worst eigenvalue. A certified solution
/// must stay nonnegative up to `1e-6` relative slack.
pub fn verify_sos_residual(
    problem: &SynthesisProblem,
    result: &SynthesisResult,
    radius: f64,
    density: usize,
) -> SosGridReport {
    let n = problem.n;
    let density = density.max(2);
    let mut min_eig = f64::INFINITY;
    let mut min_rel = f64::INFINITY;
    let mut idx = vec![0usize; n];
    let mut points = 0;
    loop {
        let x: Vec<f64> = idx
            .iter()
            .map(|&i| -radius + 2.0 * radius * i as f64 / (density - 1) as f64)
            .collect();
        let s = condition_matrix(problem, &result.phi, &result.k, &result.gamma, &x);
        let eig = s.min_eig();
        min_eig = min_eig.min(eig);
        min_rel = min_rel.min(eig / (1.0 + s.frob_norm()));
        points += 1;

        // advance the mixed-radix counter
        let mut pos = 0;
        loop {
            if pos == n {
                return SosGridReport {
                    min_eig,
                    min_eig_rel: min_rel,
                    points,
                    pass: min_rel >= -1e-6,
                };
            }
            idx[pos] += 1;
            if idx[pos] < density {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Report from the harness-side ISS oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Worst normalized slack of the decrease inequality over the samples.
    pub worst_slack: f64,
    pub samples: usize,
    pub pass: bool,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Check the decrease inequality `Vdot <= -kappa V + rho |w|^2` against the
/// true dynamics at sampled states and adversarial inputs. Slack is
/// normalized by `1 + V(x)`; the tolerance absorbs solver-level roundoff.
pub fn certify_iss_oracle(
    class: &SubsystemClass,
    result: &SynthesisResult,
    card: usize,
    samples: usize,
    state_radius: f64,
    w_radius: f64,
    seed: u64,
    slack_tol: f64,
) -> Result<CertificateReport> {
    if class.truth.is_none() {
        return Err(Error::InvalidProblem(
            "the ISS oracle needs harness-mode ground truth".into(),
        ));
    }
    let n = class.n;
    let sigma = card * n;
    let d = class.assemble_d(card);
    let reduced = datagen::true_reduced_stack(class)?;
    let a_true = Mat::from_fn(n, class.dict_f.len(), |r, c| reduced.get(r, c));
    let b_true = Mat::from_fn(n, class.dict_g.rows(), |r, c| {
        reduced.get(r, class.dict_f.len() + c)
    });

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for sample in 0..samples {
        // the first two samples pin the boundary cases: the origin, and w = 0
        let x: Vec<f64> = if sample == 0 {
            vec![0.0; n]
        } else {
            (0..n)
                .map(|c| {
                    datagen::uniform_symmetric(
                        seed,
                        0,
                        streams::CERT_STATE,
                        (sample * n + c) as u64,
                        state_radius,
                    )
                })
                .collect()
        };
        let w: Vec<f64> = if sample == 1 {
            vec![0.0; sigma]
        } else {
            (0..sigma)
                .map(|c| {
                    datagen::uniform_symmetric(
                        seed,
                        0,
                        streams::CERT_INPUT,
                        (sample * sigma + c) as u64,
                        w_radius,
                    )
                })
                .collect()
        };

        let u = result.controller(&x);
        let fx = crate::polycore::eval_dictionary(&class.dict_f, &x)?;
        let gu = class.dict_g.eval(&x).matvec(&u);
        let dw = d.matvec(&w);
        let mut xdot = a_true.matvec(&fx);
        let bgu = b_true.matvec(&gu);
        for c in 0..n {
            xdot[c] += bgu[c] + dw[c];
        }
        let px = result.p.matvec(&x);
        let vdot: f64 = 2.0 * px.iter().zip(&xdot).map(|(a, b)| a * b).sum::<f64>();
        let v = result.lyapunov(&x);
        let wsq: f64 = w.iter().map(|c| c * c).sum();
        let slack = (vdot + result.kappa * v - result.rho * wsq) / (1.0 + v);
        if slack > worst {
            worst = slack;
            witness = Some((x.clone(), w.clone()));
        }
    }
    let pass = worst <= slack_tol;
    Ok(CertificateReport {
        worst_slack: worst,
        samples,
        pass,
        witness: if pass { None } else { witness },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::GroundTruth;

    fn mono(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    /// Scalar dimension bookkeeping fixture with empty data.
    fn scalar_problem(sigma: usize) -> SynthesisProblem {
        let z = SymMatrix::zeros(2 + 1 + sigma);
        SynthesisProblem {
            n: 1,
            m: 1,
            dict_f: vec![mono(&[1])],
            dict_g: PolynomialMatrix::identity(1, 1),
            psi: PolynomialMatrix::identity(1, 1),
            kappa: 0.5,
            vartheta: 0.5,
            mode: SynthesisMode::UnknownInterconnection {
                varkappa: 0.12,
                z,
                sigma,
            },
            deg_k: 0,
            deg_gamma: 0,
            gram_degree: None,
        }
    }

    #[test]
    fn condition_dimension_bookkeeping() {
        // scalar cascade: n=1, N=1, M=1, sigma=1 -> 4x4
        assert_eq!(scalar_problem(1).condition_dim(), 4);
    }

    #[test]
    fn rho_formula_matches_reported_values() {
        let rho = rho_from_bound(2.0351e6, 0.05, 1.0);
        assert!((rho - 5.0876e3).abs() / 5.0876e3 < 1e-3, "rho = {rho}");
        let rho = rho_from_bound(537.23, 0.04, 0.8);
        assert!((rho - 1.0745).abs() / 1.0745 < 1e-3, "rho = {rho}");
        let rho = rho_from_bound(1.7567e6, 0.06, 0.5);
        assert!((rho - 1.2649e4).abs() / 1.2649e4 < 1e-3, "rho = {rho}");
    }

    #[test]
    fn condition_matrix_is_affine_in_decisions() {
        let problem = scalar_problem(1);
        let x = [0.7];
        let phi_a = SymMatrix::diag(&[1.0]);
        let phi_b = SymMatrix::diag(&[3.0]);
        let phi_mid = SymMatrix::diag(&[2.0]);
        let k = PolynomialMatrix::from_constant(&Mat::from_rows(&[vec![-2.0]]), 1);
        let gamma = Poly::constant(1, 0.3);
        let sa = condition_matrix(&problem, &phi_a, &k, &gamma, &x);
        let sb = condition_matrix(&problem, &phi_b, &k, &gamma, &x);
        let sm = condition_matrix(&problem, &phi_mid, &k, &gamma, &x);
        for i in 0..4 {
            for j in 0..=i {
                let dd = sa.get(i, j) + sb.get(i, j) - 2.0 * sm.get(i, j);
                assert!(dd.abs() < 1e-12);
            }
        }
    }

    fn scalar_class() -> SubsystemClass {
        SubsystemClass {
            n: 1,
            m: 1,
            dict_f: vec![mono(&[1])],
            dict_g: PolynomialMatrix::identity(1, 1),
            psi_override: None,
            truth: Some(GroundTruth {
                a_star: Mat::from_rows(&[vec![0.5]]),
                b_star: Mat::from_rows(&[vec![1.0]]),
                f_star_dict: vec![mono(&[1])],
                g_star_dict: PolynomialMatrix::identity(1, 1),
            }),
            d_block: Mat::from_rows(&[vec![0.1]]),
            kappa: 0.5,
            vartheta: 0.5,
            varkappa: Some(0.12),
        }
    }

    /// End-to-end scalar synthesis: collect data from an unstable scalar
    /// system, compile, solve, and check every certificate layer.
    #[test]
    fn scalar_end_to_end() {
        use crate::datagen::{collect, CollectConfig, NoiseMode};
        use crate::network::{instantiate_truncation, Boundary, NetworkDescriptor, Topology};

        let class = scalar_class();
        let desc = NetworkDescriptor::homogeneous(class, Topology::Cascade);
        let trunc = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();
        let coll = collect(
            &trunc,
            desc.class(),
            CollectConfig {
                t_samples: 12,
                tau: 0.05,
                substeps: 20,
                noise_bound: 1e-3,
                noise_mode: NoiseMode::Explicit,
                seed: 7,
                amplitude: 1.0,
                x0_magnitude: 1.0,
            },
        )
        .unwrap();
        let rec = coll.record_for(1);
        let data =
            datagen::build_regressors(&rec, &desc.class().dict_f, &desc.class().dict_g).unwrap();
        let psi = crate::polycore::factor_transformation(&desc.class().dict_f, 1, None).unwrap();
        let problem =
            SynthesisProblem::unknown_interconnection(desc.class(), &rec, &data, psi, 0, 0)
                .unwrap();
        let (result, margin) =
            solve_synthesis(&problem, &SolverConfig::default()).expect("feasible synthesis");
        assert!(margin.margin >= MARGIN_ACCEPT);
        assert!(result.alpha_lo > 0.0 && result.alpha_lo <= result.alpha_hi);
        // P * Phi = I
        let prod = result.p.to_dense().matmul(&result.phi.to_dense());
        assert!((prod.get(0, 0) - 1.0).abs() < 1e-8);

        // grid residual stays certified
        let grid = verify_sos_residual(&problem, &result, 1.0, 11);
        assert!(grid.pass, "grid min {}", grid.min_eig_rel);

        // oracle certification against the true dynamics
        let report =
            certify_iss_oracle(desc.class(), &result, 1, 500, 1.0, 1.0, 123, 1e-6).unwrap();
        assert!(report.pass, "worst slack {}", report.worst_slack);

        // corrupting the Lyapunov matrix must break the pointwise certificate
        let mut corrupted = result.clone();
        corrupted.phi = result.phi.scale(10.0);
        let bad = verify_sos_residual(&problem, &corrupted, 1.0, 11);
        assert!(!bad.pass, "scaled-out certificate still passed");
    }

    #[test]
    fn oracle_boundary_example() {
        // xdot = -x + u + w with P = 1, K = 0, kappa = 1, rho = 1:
        // at (x, w) = (1, 1), Vdot = 0 and -kappa V + rho w^2 = 0
        let mut class = scalar_class();
        class.truth = Some(GroundTruth {
            a_star: Mat::from_rows(&[vec![-1.0]]),
            b_star: Mat::from_rows(&[vec![1.0]]),
            f_star_dict: vec![mono(&[1])],
            g_star_dict: PolynomialMatrix::identity(1, 1),
        });
        class.d_block = Mat::from_rows(&[vec![1.0]]);
        let result = SynthesisResult {
            phi: SymMatrix::diag(&[1.0]),
            p: SymMatrix::diag(&[1.0]),
            k: PolynomialMatrix::zeros(1, 1, 1),
            gamma: Poly::zero(1),
            alpha_lo: 1.0,
            alpha_hi: 1.0,
            rho: 1.0,
            kappa: 1.0,
            vartheta: 1.0,
            margin: 1.0,
        };
        let x = [1.0];
        let w = [1.0];
        let v = result.lyapunov(&x);
        let xdot = -x[0] + 0.0 + w[0];
        let vdot = 2.0 * x[0] * 1.0 * xdot;
        assert_eq!(vdot, 0.0);
        assert_eq!(-result.kappa * v + result.rho * (w[0] * w[0]), 0.0);

        // sampled oracle over the ball, boundary cases included
        let report = certify_iss_oracle(&class, &result, 1, 200, 1.0, 1.0, 9, 1e-6).unwrap();
        assert!(report.pass, "worst slack {}", report.worst_slack);
    }
}
