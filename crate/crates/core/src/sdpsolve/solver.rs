//! Homogeneous self-dual interior-point method for the standard form in
//! [`super::problem`].
//!
//! Primal-dual path following with Nesterov–Todd scaling and a Mehrotra
//! predictor-corrector step, on the homogeneous embedding
//!
//! ```text
//!   A x        = tau b
//!   A^T y + z  = tau c
//!   c^T x - b^T y + kappa = 0
//! ```
//!
//! with `x, z` in the cone (free scalars carry `z = 0`), `tau, kappa >= 0`.
//! Convergence with `tau > 0` yields an optimal pair `(x, y, z) / tau`;
//! convergence with `kappa > 0` yields an infeasibility certificate, decided
//! by the tau/kappa ratio test. Dense block Cholesky factorizations carry
//! the scaling; one factorization of the Schur complement per iteration.
//! Every loop runs in a fixed order, so solves are deterministic.

use crate::error::{Error, Result};
use crate::polycore::{cholesky, cholesky_solve, Mat, SymMatrix};

use super::problem::{
    InfeasibilityKind, SdpProblem, SdpSolution, SolverConfig, Status, VarId,
};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Variable layout: free scalars first, then the packed lower triangles of
/// the PSD blocks with off-diagonals scaled by sqrt(2).
struct Layout {
    n_free: usize,
    dims: Vec<usize>,
    offs: Vec<usize>,
    nv_c: usize,
}

impl Layout {
    fn new(problem: &SdpProblem) -> Self {
        let mut offs = Vec::with_capacity(problem.block_dims.len());
        let mut acc = 0;
        for &d in &problem.block_dims {
            offs.push(acc);
            acc += d * (d + 1) / 2;
        }
        Layout {
            n_free: problem.n_free,
            dims: problem.block_dims.clone(),
            offs,
            nv_c: acc,
        }
    }

    fn conic_index(&self, block: usize, row: usize, col: usize) -> usize {
        self.offs[block] + row * (row + 1) / 2 + col
    }
}

fn svec_to_mat(dim: usize, v: &[f64]) -> Mat {
    let mut m = Mat::zeros(dim, dim);
    let mut idx = 0;
    for i in 0..dim {
        for j in 0..=i {
            let val = if i == j { v[idx] } else { v[idx] / SQRT2 };
            m.set(i, j, val);
            m.set(j, i, val);
            idx += 1;
        }
    }
    m
}

fn mat_to_svec(m: &Mat) -> Vec<f64> {
    let dim = m.rows();
    let mut v = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in 0..=i {
            if i == j {
                v.push(m.get(i, i));
            } else {
                v.push(0.5 * (m.get(i, j) + m.get(j, i)) * SQRT2);
            }
        }
    }
    v
}

/// Lower-triangular inverse by forward substitution.
fn tri_inverse(l: &Mat) -> Mat {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        for i in col..n {
            let mut s = e[i];
            for k in col..i {
                s -= l.get(i, k) * inv.get(k, col);
            }
            inv.set(i, col, s / l.get(i, i));
        }
    }
    inv
}

/// Per-block Nesterov–Todd scaling data.
struct BlockScaling {
    /// Scaling point factor: R with T = R R^T, lambda = R^{-1} X R^{-T}.
    r: Mat,
    rinv: Mat,
    t: Mat,
    tinv: Mat,
    /// Diagonal scaled point (ascending).
    sigma: Vec<f64>,
    /// Cholesky factors of the current X and Z.
    lx: Mat,
    lz: Mat,
}

fn nt_scaling(x: &Mat, z: &Mat) -> Result<BlockScaling> {
    let lx = cholesky(x, 0.0).map_err(|_| Error::InvalidProblem("iterate left the cone".into()))?;
    let lz = cholesky(z, 0.0).map_err(|_| Error::InvalidProblem("iterate left the cone".into()))?;
    // L_x^T Z L_x is SPD with eigenvalues sigma^2 and eigenvectors V such
    // that R = L_x V Sigma^{-1/2} scales X and Z to the same diagonal.
    let w = lx.transpose().matmul(&z.matmul(&lx));
    let (sig2, vmat) = SymMatrix::from_dense(&w).eig();
    let sigma: Vec<f64> = sig2.iter().map(|&s| s.max(1e-300).sqrt()).collect();
    let n = x.rows();
    let mut v_scaled = vmat.clone();
    for j in 0..n {
        let s = 1.0 / sigma[j].sqrt();
        for i in 0..n {
            v_scaled.set(i, j, vmat.get(i, j) * s);
        }
    }
    let r = lx.matmul(&v_scaled);
    let lx_inv = tri_inverse(&lx);
    // R^{-1} = Sigma^{1/2} V^T L_x^{-1}
    let mut vt_scaled = vmat.transpose();
    for i in 0..n {
        let s = sigma[i].sqrt();
        for j in 0..n {
            vt_scaled.set(i, j, vt_scaled.get(i, j) * s);
        }
    }
    let rinv = vt_scaled.matmul(&lx_inv);
    let t = r.matmul(&r.transpose());
    let tinv = rinv.transpose().matmul(&rinv);
    Ok(BlockScaling {
        r,
        rinv,
        t,
        tinv,
        sigma,
        lx,
        lz,
    })
}

/// Internal standard form with sparse rows split into free and conic parts.
pub(super) struct Internal {
    layout: Layout,
    rows_f: Vec<Vec<(usize, f64)>>,
    rows_c: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    c_f: Vec<f64>,
    c_c: Vec<f64>,
    /// Row scaling applied during presolve; duals are mapped back through it.
    row_scale: Vec<f64>,
    p: usize,
    nu: f64,
}

impl Internal {
    pub(super) fn build(problem: &SdpProblem) -> Result<Self> {
        problem.validate()?;
        let layout = Layout::new(problem);
        let p = problem.equalities.len();
        let mut rows_f = vec![Vec::new(); p];
        let mut rows_c = vec![Vec::new(); p];
        let mut b = Vec::with_capacity(p);
        let mut row_scale = Vec::with_capacity(p);

        let convert = |v: &VarId, coeff: f64| -> (bool, usize, f64) {
            match *v {
                VarId::Free(k) => (true, k, coeff),
                VarId::Entry { block, row, col } => {
                    let idx = layout.conic_index(block, row, col);
                    let c = if row == col { coeff } else { coeff / SQRT2 };
                    (false, idx, c)
                }
            }
        };

        for (r, (expr, rhs)) in problem.equalities.iter().enumerate() {
            let mut ff: Vec<(usize, f64)> = Vec::new();
            let mut cc: Vec<(usize, f64)> = Vec::new();
            for (v, coeff) in expr {
                let (is_free, idx, c) = convert(v, *coeff);
                let target = if is_free { &mut ff } else { &mut cc };
                if let Some(slot) = target.iter_mut().find(|(i, _)| *i == idx) {
                    slot.1 += c;
                } else {
                    target.push((idx, c));
                }
            }
            ff.sort_by_key(|&(i, _)| i);
            cc.sort_by_key(|&(i, _)| i);
            let scale = ff
                .iter()
                .chain(cc.iter())
                .fold(0.0_f64, |m, &(_, v)| m.max(v.abs()))
                .max(rhs.abs())
                .max(1e-12);
            for t in ff.iter_mut().chain(cc.iter_mut()) {
                t.1 /= scale;
            }
            rows_f[r] = ff;
            rows_c[r] = cc;
            b.push(rhs / scale);
            row_scale.push(scale);
        }

        let mut c_f = vec![0.0; layout.n_free];
        let mut c_c = vec![0.0; layout.nv_c];
        for (v, coeff) in &problem.objective {
            let (is_free, idx, c) = convert(v, *coeff);
            if is_free {
                c_f[idx] += c;
            } else {
                c_c[idx] += c;
            }
        }

        let nu = layout.dims.iter().map(|&d| d as f64).sum();
        Ok(Internal {
            layout,
            rows_f,
            rows_c,
            b,
            c_f,
            c_c,
            row_scale,
            p,
            nu,
        })
    }

    fn apply_a(&self, xf: &[f64], xc: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|r| {
                let mut s = 0.0;
                for &(i, v) in &self.rows_f[r] {
                    s += v * xf[i];
                }
                for &(i, v) in &self.rows_c[r] {
                    s += v * xc[i];
                }
                s
            })
            .collect()
    }

    fn apply_at(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut out_f = vec![0.0; self.layout.n_free];
        let mut out_c = vec![0.0; self.layout.nv_c];
        for r in 0..self.p {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for &(i, v) in &self.rows_f[r] {
                out_f[i] += v * yr;
            }
            for &(i, v) in &self.rows_c[r] {
                out_c[i] += v * yr;
            }
        }
        (out_f, out_c)
    }
}

/// Full iterate of the embedding.
#[derive(Clone)]
struct Iterate {
    xf: Vec<f64>,
    xc: Vec<f64>,
    y: Vec<f64>,
    zc: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dxf: Vec<f64>,
    dxc: Vec<f64>,
    dy: Vec<f64>,
    dzc: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Scaled-space operators for one iteration.
struct Scalings {
    blocks: Vec<BlockScaling>,
}

impl Scalings {
    fn apply_h(&self, layout: &Layout, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nv_c];
        for (b, sc) in self.blocks.iter().enumerate() {
            let d = layout.dims[b];
            let lo = layout.offs[b];
            let hi = lo + d * (d + 1) / 2;
            let m = svec_to_mat(d, &v[lo..hi]);
            let res = sc.t.matmul(&m).matmul(&sc.t);
            out[lo..hi].copy_from_slice(&mat_to_svec(&res));
        }
        out
    }

    fn apply_hinv(&self, layout: &Layout, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nv_c];
        for (b, sc) in self.blocks.iter().enumerate() {
            let d = layout.dims[b];
            let lo = layout.offs[b];
            let hi = lo + d * (d + 1) / 2;
            let m = svec_to_mat(d, &v[lo..hi]);
            let res = sc.tinv.matmul(&m).matmul(&sc.tinv);
            out[lo..hi].copy_from_slice(&mat_to_svec(&res));
        }
        out
    }
}

/// Factored KKT system for one iteration: `M = A_c H A_c^T` (Cholesky) plus
/// the Schur complement over the free columns.
struct Kkt {
    m_dense: Mat,
    m_chol: Mat,
    a_f: Mat,
    minv_af: Mat,
    sf_chol: Option<Mat>,
    p: usize,
    n_free: usize,
}

impl Kkt {
    fn factor(internal: &Internal, scal: &Scalings) -> Result<Kkt> {
        let p = internal.p;
        let layout = &internal.layout;
        let nvc = layout.nv_c;

        // Y[r] = H A_c^T e_r, built blockwise through sparse outer products.
        let mut y = vec![0.0; p * nvc];
        for r in 0..p {
            let row = &internal.rows_c[r];
            if row.is_empty() {
                continue;
            }
            let chunk = &mut y[r * nvc..(r + 1) * nvc];
            for (b, sc) in scal.blocks.iter().enumerate() {
                let d = layout.dims[b];
                let lo = layout.offs[b];
                let hi = lo + d * (d + 1) / 2;
                let entries: Vec<(usize, usize, f64)> = row
                    .iter()
                    .filter(|&&(i, _)| i >= lo && i < hi)
                    .map(|&(i, v)| {
                        let local = i - lo;
                        // invert the packed index
                        let mut ii = 0;
                        while (ii + 1) * (ii + 2) / 2 <= local {
                            ii += 1;
                        }
                        let jj = local - ii * (ii + 1) / 2;
                        (ii, jj, v)
                    })
                    .collect();
                if entries.is_empty() {
                    continue;
                }
                // S = mat(a_r) restricted to this block; compute T S T as
                // sum over entries of scaled outer products of T columns.
                let mut u = Mat::zeros(d, d);
                for &(ii, jj, v) in &entries {
                    let val = if ii == jj { v } else { v / SQRT2 };
                    for row_i in 0..d {
                        let ti = sc.t.get(row_i, ii);
                        let tj = sc.t.get(row_i, jj);
                        if ti == 0.0 && tj == 0.0 {
                            continue;
                        }
                        for col_j in 0..d {
                            let mut acc = ti * val * sc.t.get(col_j, jj);
                            if ii != jj {
                                acc += tj * val * sc.t.get(col_j, ii);
                            }
                            u.add_at(row_i, col_j, acc);
                        }
                    }
                }
                chunk[lo..hi].copy_from_slice(&mat_to_svec(&u));
            }
        }

        // M = A_c Y^T, symmetrized.
        let mut m_dense = Mat::zeros(p, p);
        for r2 in 0..p {
            let yc = &y[r2 * nvc..(r2 + 1) * nvc];
            for r1 in 0..p {
                let mut s = 0.0;
                for &(i, v) in &internal.rows_c[r1] {
                    s += v * yc[i];
                }
                m_dense.set(r1, r2, s);
            }
        }
        for i in 0..p {
            for j in 0..i {
                let avg = 0.5 * (m_dense.get(i, j) + m_dense.get(j, i));
                m_dense.set(i, j, avg);
                m_dense.set(j, i, avg);
            }
        }
        // static regularization keeps duplicate rows factorable
        let reg = 1e-12
            * (0..p)
                .map(|i| m_dense.get(i, i))
                .fold(0.0_f64, f64::max)
                .max(1.0);
        for i in 0..p {
            m_dense.add_at(i, i, reg);
        }

        let mut m_chol = cholesky(&m_dense, 0.0);
        if m_chol.is_err() {
            for i in 0..p {
                m_dense.add_at(i, i, reg * 1e4);
            }
            m_chol = cholesky(&m_dense, 0.0);
        }
        let m_chol = m_chol
            .map_err(|_| Error::InvalidProblem("KKT system numerically singular".into()))?;

        let n_free = internal.layout.n_free;
        let mut a_f = Mat::zeros(p, n_free);
        for r in 0..p {
            for &(i, v) in &internal.rows_f[r] {
                a_f.set(r, i, v);
            }
        }
        let mut minv_af = Mat::zeros(p, n_free);
        let mut sf_chol = None;
        if n_free > 0 {
            for j in 0..n_free {
                let col = cholesky_solve(&m_chol, &a_f.col(j));
                minv_af.set_col(j, &col);
            }
            let sf = a_f.transpose().matmul(&minv_af);
            sf_chol = Some(cholesky(&sf, 0.0).map_err(|_| {
                Error::InvalidProblem(
                    "free-variable block is rank deficient; remove redundant free variables"
                        .into(),
                )
            })?);
        }

        Ok(Kkt {
            m_dense,
            m_chol,
            a_f,
            minv_af,
            sf_chol,
            p,
            n_free,
        })
    }

    /// Solve `[M A_f; A_f^T 0] [dy; dxf] = [r1; r2]` with two rounds of
    /// iterative refinement.
    fn solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dy = vec![0.0; self.p];
        let mut dxf = vec![0.0; self.n_free];
        let mut res1 = r1.to_vec();
        let mut res2 = r2.to_vec();
        for _round in 0..3 {
            let (cy, cxf) = self.solve_once(&res1, &res2);
            for i in 0..self.p {
                dy[i] += cy[i];
            }
            for i in 0..self.n_free {
                dxf[i] += cxf[i];
            }
            // recompute residuals
            let mdy = self.m_dense.matvec(&dy);
            let afx = self.a_f.matvec(&dxf);
            for i in 0..self.p {
                res1[i] = r1[i] - mdy[i] - afx[i];
            }
            let atdy = self.a_f.transpose().matvec(&dy);
            for i in 0..self.n_free {
                res2[i] = r2[i] - atdy[i];
            }
        }
        (dy, dxf)
    }

    fn solve_once(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u1 = cholesky_solve(&self.m_chol, r1);
        if self.n_free == 0 {
            return (u1, Vec::new());
        }
        let sf_chol = self.sf_chol.as_ref().expect("factored with free vars");
        let mut rhs_f = self.a_f.transpose().matvec(&u1);
        for i in 0..self.n_free {
            rhs_f[i] -= r2[i];
        }
        let dxf = cholesky_solve(sf_chol, &rhs_f);
        let correction = self.minv_af.matvec(&dxf);
        let dy: Vec<f64> = u1.iter().zip(&correction).map(|(a, b)| a - b).collect();
        (dy, dxf)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(super) fn solve_internal(
    problem: &SdpProblem,
    config: &SolverConfig,
) -> Result<SdpSolution> {
    let internal = Internal::build(problem)?;
    let layout = &internal.layout;

    let mut it = Iterate {
        xf: vec![0.0; layout.n_free],
        xc: identity_svec(layout),
        y: vec![0.0; internal.p],
        zc: identity_svec(layout),
        tau: 1.0,
        kappa: 1.0,
    };

    let norm_b = norm2(&internal.b).max(1.0);
    let norm_c = norm2(&internal.c_c).max(norm2(&internal.c_f)).max(1.0);
    let nu1 = internal.nu + 1.0;

    let mut best: Option<(f64, [f64; 4], SdpSolution)> = None;
    let mut iterations = 0;
    let mut mu0 = f64::NAN;
    let mut stall = 0usize;

    for iter in 0..config.max_iter {
        iterations = iter;
        // residuals
        let ax = internal.apply_a(&it.xf, &it.xc);
        let rp: Vec<f64> = (0..internal.p)
            .map(|r| ax[r] - it.tau * internal.b[r])
            .collect();
        let (aty_f, aty_c) = internal.apply_at(&it.y);
        let rd_f: Vec<f64> = (0..layout.n_free)
            .map(|i| aty_f[i] - it.tau * internal.c_f[i])
            .collect();
        let rd_c: Vec<f64> = (0..layout.nv_c)
            .map(|i| aty_c[i] + it.zc[i] - it.tau * internal.c_c[i])
            .collect();
        let cx = dot(&internal.c_f, &it.xf) + dot(&internal.c_c, &it.xc);
        let by = dot(&internal.b, &it.y);
        let rg = cx - by + it.kappa;
        let mu = (dot(&it.xc, &it.zc) + it.tau * it.kappa) / nu1;

        // convergence at the scaled point
        let quality = {
            let t = it.tau;
            let pres = norm2(&rp.iter().map(|v| v / t).collect::<Vec<_>>()) / norm_b;
            let dres = {
                let mut s = 0.0;
                for v in rd_f.iter().chain(rd_c.iter()) {
                    s += (v / t) * (v / t);
                }
                s.sqrt() / norm_c
            };
            let pobj = cx / t;
            let dobj = by / t;
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let compl = mu / (it.tau * it.tau) / (1.0 + pobj.abs());
            (pres, dres, gap, compl)
        };
        let (pres, dres, gap, compl) = quality;
        if std::env::var_os("CLFNET_SDP_TRACE").is_some() {
            eprintln!(
                "it {iter:3}  pres {pres:9.2e}  dres {dres:9.2e}  gap {gap:9.2e}  compl {compl:9.2e}  mu {mu:9.2e}  tau {:9.2e}  kappa {:9.2e}",
                it.tau, it.kappa
            );
        }
        if mu0.is_nan() {
            mu0 = mu.max(1e-300);
        }
        let score = pres.max(dres).max(gap.min(compl));
        let best_score = best.as_ref().map(|(s, _, _)| *s).unwrap_or(f64::INFINITY);
        if score < 0.99 * best_score {
            let sol = extract_solution(&internal, problem, &it, Status::MaxIterations, iter);
            best = Some((score, [pres, dres, gap, compl], sol));
            stall = 0;
        } else {
            stall += 1;
        }
        // Primal feasibility and complementarity are the certified quantities;
        // the dual residual gets one order of slack because degenerate optima
        // push the scaled system against the numerical floor.
        if pres <= config.tol_eq
            && dres <= 10.0 * config.tol_eq
            && (gap <= config.tol_gap || compl <= config.tol_gap)
        {
            let sol = extract_solution(&internal, problem, &it, Status::Optimal, iter);
            return Ok(sol);
        }
        // Numerical limits: complementarity collapsed far beyond anything the
        // KKT solves can track, residuals rebounding, or no progress at all.
        if mu < 1e-13 * mu0
            || (mu < 1e-11 * mu0 && score > 100.0 * best_score)
            || stall >= 15
        {
            break;
        }

        // infeasibility certificates from the tau/kappa ratio test
        if it.kappa > 1e-10 && it.tau < 1e-6 * it.kappa.max(1.0) || mu < 1e-12 {
            if by > 0.0 {
                let mut resid = 0.0;
                for v in aty_f.iter() {
                    resid += v * v;
                }
                for (i, v) in aty_c.iter().enumerate() {
                    let w = v + it.zc[i];
                    resid += w * w;
                }
                let q = resid.sqrt() * norm_b / by;
                if q <= 1e-7 {
                    let mut sol =
                        extract_solution(&internal, problem, &it, Status::Infeasible(InfeasibilityKind::Primal), iter);
                    sol.certificate = Some(unscale_duals(&internal, &it.y));
                    return Ok(sol);
                }
            }
            if cx < 0.0 {
                let q = norm2(&ax) * norm_c / (-cx);
                if q <= 1e-7 {
                    let mut sol =
                        extract_solution(&internal, problem, &it, Status::Infeasible(InfeasibilityKind::Dual), iter);
                    let mut ray = it.xf.clone();
                    ray.extend_from_slice(&it.xc);
                    sol.certificate = Some(ray);
                    return Ok(sol);
                }
            }
        }

        // NT scaling
        let mut blocks = Vec::with_capacity(layout.dims.len());
        let mut scaling_ok = true;
        for (b, &d) in layout.dims.iter().enumerate() {
            let lo = layout.offs[b];
            let hi = lo + d * (d + 1) / 2;
            let xm = svec_to_mat(d, &it.xc[lo..hi]);
            let zm = svec_to_mat(d, &it.zc[lo..hi]);
            match nt_scaling(&xm, &zm) {
                Ok(s) => blocks.push(s),
                Err(_) => {
                    scaling_ok = false;
                    break;
                }
            }
        }
        if !scaling_ok {
            break;
        }
        let scal = Scalings { blocks };

        let kkt = match Kkt::factor(&internal, &scal) {
            Ok(k) => k,
            Err(_) => break,
        };

        // shared pieces
        let hc = scal.apply_h(layout, &internal.c_c);
        let a_hc = internal.apply_a(&vec![0.0; layout.n_free], &hc);
        let chc = dot(&internal.c_c, &hc);
        // v = [b + A_c H c_c ; c_f]
        let v1: Vec<f64> = (0..internal.p).map(|r| internal.b[r] + a_hc[r]).collect();
        let (w2y, w2f) = kkt.solve(&v1, &internal.c_f);
        // a = [A_c H c_c - b ; c_f]
        let a1: Vec<f64> = (0..internal.p).map(|r| a_hc[r] - internal.b[r]).collect();

        // Raw Newton solve for explicit right-hand-side targets:
        //   A dx - b dtau                    = rp_t
        //   A^T dy + dz - c dtau             = rd_t   (free rows carry dz = 0)
        //   c^T dx - b^T dy + dkappa         = rg_t
        //   dx~ + dz~                        = E_b    (NT-scaled, per block)
        //   kappa dtau + tau dkappa          = dtau_t
        let solve_raw = |rp_t: &[f64],
                         rdc_t: &[f64],
                         rdf_t: &[f64],
                         rg_t: f64,
                         e_blocks: &[Mat],
                         dtau_t: f64|
         -> Direction {
            // zeta = svec(R^{-T} E R^{-1}) per block
            let mut zeta = vec![0.0; layout.nv_c];
            for (b, sc) in scal.blocks.iter().enumerate() {
                let d = layout.dims[b];
                let lo = layout.offs[b];
                let hi = lo + d * (d + 1) / 2;
                let m = sc.rinv.transpose().matmul(&e_blocks[b]).matmul(&sc.rinv);
                zeta[lo..hi].copy_from_slice(&mat_to_svec(&m));
            }
            let g: Vec<f64> = (0..layout.nv_c).map(|i| zeta[i] - rdc_t[i]).collect();
            let hg = scal.apply_h(layout, &g);
            let a_hg = internal.apply_a(&vec![0.0; layout.n_free], &hg);
            let u1: Vec<f64> = (0..internal.p).map(|r| rp_t[r] - a_hg[r]).collect();
            let (w1y, w1f) = kkt.solve(&u1, rdf_t);

            let rhs3 = rg_t - dtau_t / it.tau - dot(&internal.c_c, &hg);
            let num = rhs3 - dot(&a1, &w1y) - dot(&internal.c_f, &w1f);
            let den = dot(&a1, &w2y) + dot(&internal.c_f, &w2f) - chc - it.kappa / it.tau;
            let dtau = num / den;

            let dy: Vec<f64> = (0..internal.p).map(|r| w1y[r] + dtau * w2y[r]).collect();
            let dxf: Vec<f64> = (0..layout.n_free)
                .map(|i| w1f[i] + dtau * w2f[i])
                .collect();
            // dx_c = H (A_c^T dy - c_c dtau + g)
            let (_, at_dy_c) = internal.apply_at(&dy);
            let pre: Vec<f64> = (0..layout.nv_c)
                .map(|i| at_dy_c[i] - internal.c_c[i] * dtau + g[i])
                .collect();
            let dxc = scal.apply_h(layout, &pre);
            // dz_c = zeta - H^{-1} dx_c
            let hinv_dx = scal.apply_hinv(layout, &dxc);
            let dzc: Vec<f64> = (0..layout.nv_c).map(|i| zeta[i] - hinv_dx[i]).collect();
            let dkappa = (dtau_t - it.kappa * dtau) / it.tau;
            Direction {
                dxf,
                dxc,
                dy,
                dzc,
                dtau,
                dkappa,
            }
        };

        // Outer refinement: the elimination through H loses accuracy when the
        // scaled point is ill-conditioned, so re-solve against the residuals
        // of the full Newton system.
        let solve_phase = |rp_t: &[f64],
                           rdc_t: &[f64],
                           rdf_t: &[f64],
                           rg_t: f64,
                           e_blocks: &[Mat],
                           dtau_t: f64|
         -> Direction {
            let mut dir = solve_raw(rp_t, rdc_t, rdf_t, rg_t, e_blocks, dtau_t);
            for _round in 0..2 {
                let adx = internal.apply_a(&dir.dxf, &dir.dxc);
                let rp_r: Vec<f64> = (0..internal.p)
                    .map(|r| rp_t[r] - (adx[r] - internal.b[r] * dir.dtau))
                    .collect();
                let (at_f, at_c) = internal.apply_at(&dir.dy);
                let rdc_r: Vec<f64> = (0..layout.nv_c)
                    .map(|i| rdc_t[i] - (at_c[i] + dir.dzc[i] - internal.c_c[i] * dir.dtau))
                    .collect();
                let rdf_r: Vec<f64> = (0..layout.n_free)
                    .map(|i| rdf_t[i] - (at_f[i] - internal.c_f[i] * dir.dtau))
                    .collect();
                let cdx = dot(&internal.c_f, &dir.dxf) + dot(&internal.c_c, &dir.dxc);
                let rg_r = rg_t - (cdx - dot(&internal.b, &dir.dy) + dir.dkappa);
                let e_r: Vec<Mat> = scal
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(b, sc)| {
                        let d = layout.dims[b];
                        let lo = layout.offs[b];
                        let hi = lo + d * (d + 1) / 2;
                        let dx_m = svec_to_mat(d, &dir.dxc[lo..hi]);
                        let dz_m = svec_to_mat(d, &dir.dzc[lo..hi]);
                        let dxs = sc.rinv.matmul(&dx_m).matmul(&sc.rinv.transpose());
                        let dzs = sc.r.transpose().matmul(&dz_m).matmul(&sc.r);
                        let mut e = e_blocks[b].clone();
                        for i in 0..d {
                            for j in 0..d {
                                e.add_at(i, j, -(dxs.get(i, j) + dzs.get(i, j)));
                            }
                        }
                        e
                    })
                    .collect();
                let dtau_r = dtau_t - (it.kappa * dir.dtau + it.tau * dir.dkappa);

                let err = norm2(&rp_r)
                    .max(norm2(&rdc_r))
                    .max(norm2(&rdf_r))
                    .max(rg_r.abs())
                    .max(dtau_r.abs());
                let scale = norm2(rp_t)
                    .max(norm2(rdc_t))
                    .max(1.0);
                if err <= 1e-13 * scale {
                    break;
                }
                let corr = solve_raw(&rp_r, &rdc_r, &rdf_r, rg_r, &e_r, dtau_r);
                for i in 0..layout.n_free {
                    dir.dxf[i] += corr.dxf[i];
                }
                for i in 0..layout.nv_c {
                    dir.dxc[i] += corr.dxc[i];
                    dir.dzc[i] += corr.dzc[i];
                }
                for r in 0..internal.p {
                    dir.dy[r] += corr.dy[r];
                }
                dir.dtau += corr.dtau;
                dir.dkappa += corr.dkappa;
            }
            dir
        };

        // predictor (affine scaling) step: E = -Sigma, full residual targets
        let e_aff: Vec<Mat> = scal
            .blocks
            .iter()
            .map(|sc| {
                let d = sc.sigma.len();
                let mut m = Mat::zeros(d, d);
                for i in 0..d {
                    m.set(i, i, -sc.sigma[i]);
                }
                m
            })
            .collect();
        let neg = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| -x).collect() };
        let aff = solve_phase(
            &neg(&rp),
            &neg(&rd_c),
            &neg(&rd_f),
            -rg,
            &e_aff,
            -it.tau * it.kappa,
        );
        let alpha_aff = step_to_boundary(layout, &scal, &it, &aff).min(1.0);

        // centering parameter from the affine decrease
        let mu_aff = {
            let xs: Vec<f64> = it
                .xc
                .iter()
                .zip(&aff.dxc)
                .map(|(x, d)| x + alpha_aff * d)
                .collect();
            let zs: Vec<f64> = it
                .zc
                .iter()
                .zip(&aff.dzc)
                .map(|(z, d)| z + alpha_aff * d)
                .collect();
            let ts = it.tau + alpha_aff * aff.dtau;
            let ks = it.kappa + alpha_aff * aff.dkappa;
            ((dot(&xs, &zs) + ts * ks) / nu1).max(0.0)
        };
        let sigma_c = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector: E = L_Sigma^{-1}(sigma mu I - Sigma^2 - sym(dx~ dz~))
        let e_cor: Vec<Mat> = scal
            .blocks
            .iter()
            .enumerate()
            .map(|(b, sc)| {
                let d = layout.dims[b];
                let lo = layout.offs[b];
                let hi = lo + d * (d + 1) / 2;
                let dx_m = svec_to_mat(d, &aff.dxc[lo..hi]);
                let dz_m = svec_to_mat(d, &aff.dzc[lo..hi]);
                let dxs = sc.rinv.matmul(&dx_m).matmul(&sc.rinv.transpose());
                let dzs = sc.r.transpose().matmul(&dz_m).matmul(&sc.r);
                let cross = dxs.matmul(&dzs);
                let mut e = Mat::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        let sym = 0.5 * (cross.get(i, j) + cross.get(j, i));
                        let mut v = -sym;
                        if i == j {
                            v += sigma_c * mu - sc.sigma[i] * sc.sigma[i];
                        }
                        e.set(i, j, v / (0.5 * (sc.sigma[i] + sc.sigma[j])));
                    }
                }
                e
            })
            .collect();
        let d_tau_cor = sigma_c * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let eta = 1.0 - sigma_c;
        let scale_by = |v: &[f64], s: f64| -> Vec<f64> { v.iter().map(|x| -s * x).collect() };
        let dir = solve_phase(
            &scale_by(&rp, eta),
            &scale_by(&rd_c, eta),
            &scale_by(&rd_f, eta),
            -eta * rg,
            &e_cor,
            d_tau_cor,
        );

        let alpha = (0.99 * step_to_boundary(layout, &scal, &it, &dir)).min(1.0);
        if !alpha.is_finite() || alpha <= 1e-14 {
            break;
        }
        for i in 0..layout.n_free {
            it.xf[i] += alpha * dir.dxf[i];
        }
        for i in 0..layout.nv_c {
            it.xc[i] += alpha * dir.dxc[i];
            it.zc[i] += alpha * dir.dzc[i];
        }
        for r in 0..internal.p {
            it.y[r] += alpha * dir.dy[r];
        }
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }

    let (_, metrics, mut sol) =
        best.ok_or_else(|| Error::InvalidProblem("solver made no progress".into()))?;
    sol.iterations = iterations;
    // Classify the best iterate at reduced precision: one order beyond the
    // requested tolerances still certifies the solution, just less tightly.
    let [pres, dres, gap, compl] = metrics;
    if pres <= 10.0 * config.tol_eq
        && dres <= 100.0 * config.tol_eq
        && (gap <= 10.0 * config.tol_gap || compl <= 10.0 * config.tol_gap)
    {
        sol.status = Status::Optimal;
    }
    Ok(sol)
}

fn identity_svec(layout: &Layout) -> Vec<f64> {
    let mut v = vec![0.0; layout.nv_c];
    for (b, &d) in layout.dims.iter().enumerate() {
        for i in 0..d {
            v[layout.offs[b] + i * (i + 1) / 2 + i] = 1.0;
        }
    }
    v
}

/// Largest step keeping both cone variables and the tau/kappa pair interior.
fn step_to_boundary(layout: &Layout, scal: &Scalings, it: &Iterate, dir: &Direction) -> f64 {
    let mut alpha: f64 = 1e30;
    for (b, sc) in scal.blocks.iter().enumerate() {
        let d = layout.dims[b];
        let lo = layout.offs[b];
        let hi = lo + d * (d + 1) / 2;
        let dx_m = svec_to_mat(d, &dir.dxc[lo..hi]);
        let dz_m = svec_to_mat(d, &dir.dzc[lo..hi]);

        let lx_inv = tri_inverse(&sc.lx);
        let wx = lx_inv.matmul(&dx_m).matmul(&lx_inv.transpose());
        let min_x = SymMatrix::from_dense(&wx).min_eig();
        if min_x < 0.0 {
            alpha = alpha.min(-1.0 / min_x);
        }

        let lz_inv = tri_inverse(&sc.lz);
        let wz = lz_inv.matmul(&dz_m).matmul(&lz_inv.transpose());
        let min_z = SymMatrix::from_dense(&wz).min_eig();
        if min_z < 0.0 {
            alpha = alpha.min(-1.0 / min_z);
        }
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-it.tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / dir.dkappa);
    }
    alpha
}

fn unscale_duals(internal: &Internal, y: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(&internal.row_scale)
        .map(|(v, s)| v / s)
        .collect()
}

fn extract_solution(
    internal: &Internal,
    problem: &SdpProblem,
    it: &Iterate,
    status: Status,
    iterations: usize,
) -> SdpSolution {
    let layout = &internal.layout;
    let t = if it.tau.abs() > 1e-300 { it.tau } else { 1.0 };
    let free: Vec<f64> = it.xf.iter().map(|v| v / t).collect();
    let mut blocks = Vec::with_capacity(layout.dims.len());
    let mut min_eig = f64::INFINITY;
    for (b, &d) in layout.dims.iter().enumerate() {
        let lo = layout.offs[b];
        let hi = lo + d * (d + 1) / 2;
        let scaled: Vec<f64> = it.xc[lo..hi].iter().map(|v| v / t).collect();
        let m = svec_to_mat(d, &scaled);
        let sym = SymMatrix::from_dense(&m);
        min_eig = min_eig.min(sym.min_eig());
        blocks.push(sym);
    }
    if blocks.is_empty() {
        min_eig = 0.0;
    }

    // objective and residuals in original (unscaled) data
    let mut objective = 0.0;
    for (v, c) in &problem.objective {
        objective += c * read_var(&free, &blocks, v);
    }
    let mut max_eq_residual = 0.0_f64;
    for (expr, rhs) in &problem.equalities {
        let mut s = 0.0;
        for (v, c) in expr {
            s += c * read_var(&free, &blocks, v);
        }
        max_eq_residual = max_eq_residual.max((s - rhs).abs());
    }

    let duals = unscale_duals(internal, &it.y.iter().map(|v| v / t).collect::<Vec<_>>());
    let by = dot(&internal.b, &it.y) / t;
    let cx = dot(&internal.c_f, &it.xf) / t + dot(&internal.c_c, &it.xc) / t;

    SdpSolution {
        status,
        free,
        blocks,
        objective,
        max_eq_residual,
        min_block_eig: min_eig,
        duality_gap: (cx - by).abs(),
        iterations,
        duals,
        certificate: None,
    }
}

fn read_var(free: &[f64], blocks: &[SymMatrix], v: &VarId) -> f64 {
    match *v {
        VarId::Free(k) => free[k],
        VarId::Entry { block, row, col } => blocks[block].get(row, col),
    }
}
