//! Trajectory generation and data-matrix assembly.
//!
//! One noisy input–state trajectory is collected per subsystem from a finite
//! truncation of the network driven by piecewise-constant random excitation.
//! Derivative estimates, the noise-energy bound, and the consistency matrices
//! consumed by the synthesis stage are all built here.
//!
//! Randomness is counter-based: every draw is a pure hash of
//! `(seed, subsystem index, stream id, counter)`, so records are bitwise
//! reproducible across runs and platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Boundary, GroundTruth, SubsystemClass, Topology, TruncatedNetwork};
use crate::polycore::{eval_dictionary, singular_values, Mat, Monomial, PolynomialMatrix, SymMatrix};

/// Stream ids for the counter-based generator.
pub mod streams {
    pub const EXCITE: u64 = 0;
    pub const DERIVATIVE_NOISE: u64 = 1;
    pub const INITIAL_STATE: u64 = 2;
    pub const CERT_STATE: u64 = 3;
    pub const CERT_INPUT: u64 = 4;
    pub const SIM_INITIAL: u64 = 5;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` from `(seed, subsystem, stream, counter)`.
pub fn uniform(seed: u64, subsystem: u64, stream: u64, counter: u64) -> f64 {
    let key = mix64(seed) ^ mix64(subsystem ^ 0xd134_2543_de82_ef95) ^ mix64(stream ^ 0xa076_1d64_78bd_642f);
    let bits = mix64(key ^ mix64(counter));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[-amplitude, amplitude]`.
pub fn uniform_symmetric(seed: u64, subsystem: u64, stream: u64, counter: u64, amplitude: f64) -> f64 {
    amplitude * (2.0 * uniform(seed, subsystem, stream, counter) - 1.0)
}

/// Deterministic pseudo-random excitation input for subsystem `subsystem` at
/// sample index `t`: each coordinate uniform in `[-amplitude, amplitude]`.
pub fn excite(seed: u64, subsystem: usize, t: usize, amplitude: f64, m: usize) -> Vec<f64> {
    assert!(amplitude > 0.0, "excitation amplitude must be positive");
    (0..m)
        .map(|k| {
            uniform_symmetric(
                seed,
                subsystem as u64,
                streams::EXCITE,
                (t * m + k) as u64,
                amplitude,
            )
        })
        .collect()
}

/// Input source for network integration.
#[derive(Debug, Clone)]
pub enum InputPolicy<'a> {
    /// Piecewise-constant random excitation, held over each sampling interval.
    Excite { seed: u64, amplitude: f64 },
    /// Decentralized continuous feedback `u_i = K(x_i) P x_i`.
    Feedback {
        k: &'a PolynomialMatrix,
        p: &'a SymMatrix,
    },
    Zero,
}

/// Dense sampled history of a truncated network run.
#[derive(Debug, Clone)]
pub struct NetworkHistory {
    pub tau: f64,
    /// `[sample][subsystem][coordinate]`, with `n_samples = intervals + 1`.
    pub states: Vec<Vec<Vec<f64>>>,
    /// Input applied from sample `k` to `k+1`; `intervals` entries.
    pub inputs: Vec<Vec<Vec<f64>>>,
}

struct Rhs<'a> {
    class: &'a SubsystemClass,
    truth: &'a GroundTruth,
    trunc: &'a TruncatedNetwork,
}

impl<'a> Rhs<'a> {
    /// Sum of neighbour states per subsystem. Banded topologies use prefix
    /// sums so dense interconnections stay O(N) per evaluation.
    fn neighbor_sums(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.class.n;
        let count = self.trunc.size;
        match self.trunc.topology {
            Topology::Cascade => (0..count)
                .map(|i| {
                    let mut s = vec![0.0; n];
                    for &j in self.trunc.neighbors(i) {
                        for c in 0..n {
                            s[c] += states[j][c];
                        }
                    }
                    s
                })
                .collect(),
            Topology::ForwardBand { k } => {
                let mut prefix = vec![vec![0.0; n]; count + 1];
                for i in 0..count {
                    for c in 0..n {
                        prefix[i + 1][c] = prefix[i][c] + states[i][c];
                    }
                }
                (0..count)
                    .map(|i| {
                        let lo = i + 1;
                        let mut s = vec![0.0; n];
                        match self.trunc.boundary {
                            Boundary::Clip => {
                                let hi = (lo + k).min(count);
                                if lo < hi {
                                    for c in 0..n {
                                        s[c] = prefix[hi][c] - prefix[lo][c];
                                    }
                                }
                            }
                            Boundary::Wrap => {
                                let hi = lo + k;
                                if hi <= count {
                                    for c in 0..n {
                                        s[c] = prefix[hi][c] - prefix[lo][c];
                                    }
                                } else {
                                    for c in 0..n {
                                        s[c] = (prefix[count][c] - prefix[lo][c])
                                            + prefix[hi - count][c];
                                    }
                                }
                            }
                        }
                        s
                    })
                    .collect()
            }
        }
    }

    /// Drift + input + interconnection for subsystem `i` at state `x`.
    fn subsystem_rhs(&self, x: &[f64], u: &[f64], w_sum: &[f64]) -> Vec<f64> {
        let n = self.class.n;
        let fx = eval_dictionary(&self.truth.f_star_dict, x).expect("dictionary arity");
        let mut dx = self.truth.a_star.matvec(&fx);
        let gx = self.truth.g_star_dict.eval(x);
        let gu = gx.matvec(u);
        let bgu = self.truth.b_star.matvec(&gu);
        let dw = self.class.d_block.matvec(w_sum);
        for c in 0..n {
            dx[c] += bgu[c] + dw[c];
        }
        dx
    }

    fn network_rhs(&self, states: &[Vec<f64>], inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let sums = self.neighbor_sums(states);
        (0..self.trunc.size)
            .map(|i| self.subsystem_rhs(&states[i], &inputs[i], &sums[i]))
            .collect()
    }
}

fn axpy(states: &[Vec<f64>], k: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    states
        .iter()
        .zip(k)
        .map(|(x, dx)| x.iter().zip(dx).map(|(a, b)| a + h * b).collect())
        .collect()
}

/// Classical fixed-step fourth-order Runge–Kutta integration of the coupled
/// truncated network, sampling states at multiples of `tau`.
///
/// `substeps` internal steps are taken per sampling interval; the sampling
/// interval must be resolved by at least 10 substeps.
pub fn integrate(
    trunc: &TruncatedNetwork,
    class: &SubsystemClass,
    policy: &InputPolicy,
    x0: &[Vec<f64>],
    tau: f64,
    substeps: usize,
    intervals: usize,
) -> Result<NetworkHistory> {
    let truth = class
        .truth
        .as_ref()
        .ok_or_else(|| Error::InvalidProblem("integration needs harness-mode ground truth".into()))?;
    if substeps < 10 {
        return Err(Error::InvalidProblem(
            "integration substep must resolve the sampling interval at least 10 times".into(),
        ));
    }
    if x0.len() != trunc.size || x0.iter().any(|x| x.len() != class.n) {
        return Err(Error::DimensionMismatch(
            "initial state shape does not match the truncation".into(),
        ));
    }
    if x0.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidProblem("non-finite initial state".into()));
    }

    let rhs = Rhs { class, truth, trunc };
    let h = tau / substeps as f64;
    let mut state: Vec<Vec<f64>> = x0.to_vec();
    let mut states = Vec::with_capacity(intervals + 1);
    let mut inputs = Vec::with_capacity(intervals);
    states.push(state.clone());

    for interval in 0..intervals {
        // input for this interval
        let u_interval: Vec<Vec<f64>> = match policy {
            InputPolicy::Excite { seed, amplitude } => (0..trunc.size)
                .map(|i| excite(*seed, i, interval, *amplitude, class.m))
                .collect(),
            InputPolicy::Zero => vec![vec![0.0; class.m]; trunc.size],
            InputPolicy::Feedback { k, p } => state
                .iter()
                .map(|x| feedback_input(k, p, x))
                .collect(),
        };
        inputs.push(u_interval.clone());

        for step in 0..substeps {
            let eval_inputs = |s: &[Vec<f64>]| -> Vec<Vec<f64>> {
                match policy {
                    InputPolicy::Feedback { k, p } => {
                        s.iter().map(|x| feedback_input(k, p, x)).collect()
                    }
                    _ => u_interval.clone(),
                }
            };
            let k1 = rhs.network_rhs(&state, &eval_inputs(&state));
            let s2 = axpy(&state, &k1, 0.5 * h);
            let k2 = rhs.network_rhs(&s2, &eval_inputs(&s2));
            let s3 = axpy(&state, &k2, 0.5 * h);
            let k3 = rhs.network_rhs(&s3, &eval_inputs(&s3));
            let s4 = axpy(&state, &k3, h);
            let k4 = rhs.network_rhs(&s4, &eval_inputs(&s4));
            for i in 0..trunc.size {
                for c in 0..class.n {
                    state[i][c] +=
                        h / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                }
            }
            if state.iter().flatten().any(|v| !v.is_finite()) {
                let t = interval as f64 * tau + (step + 1) as f64 * h;
                return Err(Error::IntegrationDiverged { time: t });
            }
        }
        states.push(state.clone());
    }

    Ok(NetworkHistory {
        tau,
        states,
        inputs,
    })
}

/// `u = K(x) P x`.
pub fn feedback_input(k: &PolynomialMatrix, p: &SymMatrix, x: &[f64]) -> Vec<f64> {
    let px = p.matvec(x);
    k.eval(x).matvec(&px)
}

/// How the derivative-estimate noise is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Derivative estimates are the forward differences of the sampled
    /// states; the only error is the differencing residual itself.
    Implicit,
    /// Derivative estimates are the exact sampled derivatives corrupted by a
    /// per-element uniform perturbation in `[-b, b]`, so the declared noise
    /// bound is tight regardless of the sampling period.
    Explicit,
}

/// Data-collection parameters for one truncation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectConfig {
    pub t_samples: usize,
    pub tau: f64,
    pub substeps: usize,
    pub noise_bound: f64,
    pub noise_mode: NoiseMode,
    pub seed: u64,
    pub amplitude: f64,
    pub x0_magnitude: f64,
}

/// Sampled input–state data for one subsystem, plus the derivative estimate
/// and the noise-energy bound fed to the consistency matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tau: f64,
    pub t_samples: usize,
    /// m x T applied inputs.
    pub u: Mat,
    /// sigma x T neighbour states (wiring order), columns 0..T-1.
    pub w: Mat,
    /// n x (T+1) sampled states; the extra column exists only for the
    /// forward difference at the last used sample.
    pub x: Mat,
    /// n x T derivative estimate.
    pub xd: Mat,
    /// Noise-energy bound `Lambda Lambda^T` (n x n).
    pub lambda_sq: SymMatrix,
    pub seed: u64,
}

/// A completed collection run; per-subsystem records are materialized on
/// demand so dense interconnections do not replicate the shared state
/// history into thousands of W matrices.
pub struct Collection<'a> {
    pub history: NetworkHistory,
    pub trunc: &'a TruncatedNetwork,
    pub class: &'a SubsystemClass,
    pub config: CollectConfig,
}

/// Excite the truncation and sample `T+1` states per subsystem.
pub fn collect<'a>(
    trunc: &'a TruncatedNetwork,
    class: &'a SubsystemClass,
    config: CollectConfig,
) -> Result<Collection<'a>> {
    if config.t_samples == 0 {
        return Err(Error::InvalidProblem("need at least one sample".into()));
    }
    if config.noise_bound < 0.0 {
        return Err(Error::InvalidProblem("noise bound must be nonnegative".into()));
    }
    let x0: Vec<Vec<f64>> = (0..trunc.size)
        .map(|i| {
            (0..class.n)
                .map(|c| {
                    uniform_symmetric(
                        config.seed,
                        i as u64,
                        streams::INITIAL_STATE,
                        c as u64,
                        config.x0_magnitude,
                    )
                })
                .collect()
        })
        .collect();
    let policy = InputPolicy::Excite {
        seed: config.seed,
        amplitude: config.amplitude,
    };
    let history = integrate(
        trunc,
        class,
        &policy,
        &x0,
        config.tau,
        config.substeps,
        config.t_samples,
    )?;
    Ok(Collection {
        history,
        trunc,
        class,
        config,
    })
}

impl<'a> Collection<'a> {
    pub fn n_subsystems(&self) -> usize {
        self.trunc.size
    }

    /// True sampled derivatives of subsystem `i` (harness-side).
    pub fn true_derivatives(&self, i: usize) -> Mat {
        let t = self.config.t_samples;
        let n = self.class.n;
        let truth = self.class.truth.as_ref().expect("collection ran in harness mode");
        let rhs = Rhs {
            class: self.class,
            truth,
            trunc: self.trunc,
        };
        let mut xd = Mat::zeros(n, t);
        for k in 0..t {
            let sums = rhs.neighbor_sums(&self.history.states[k]);
            let dx = rhs.subsystem_rhs(
                &self.history.states[k][i],
                &self.history.inputs[k][i],
                &sums[i],
            );
            xd.set_col(k, &dx);
        }
        xd
    }

    /// Build the record for subsystem `i`.
    pub fn record_for(&self, i: usize) -> TrajectoryRecord {
        let t = self.config.t_samples;
        let n = self.class.n;
        let m = self.class.m;
        let neighbors = self.trunc.neighbors(i);
        let sigma = neighbors.len() * n;

        let mut x = Mat::zeros(n, t + 1);
        for k in 0..=t {
            x.set_col(k, &self.history.states[k][i]);
        }
        let mut u = Mat::zeros(m, t);
        for k in 0..t {
            u.set_col(k, &self.history.inputs[k][i]);
        }
        let mut w = Mat::zeros(sigma, t);
        for k in 0..t {
            for (b, &j) in neighbors.iter().enumerate() {
                for c in 0..n {
                    w.set(b * n + c, k, self.history.states[k][j][c]);
                }
            }
        }

        let xd = match self.config.noise_mode {
            NoiseMode::Implicit => forward_difference(&x, self.config.tau).expect("T >= 1"),
            NoiseMode::Explicit => {
                let mut xd = self.true_derivatives(i);
                let b = self.config.noise_bound;
                for k in 0..t {
                    for c in 0..n {
                        let d = uniform_symmetric(
                            self.config.seed,
                            i as u64,
                            streams::DERIVATIVE_NOISE,
                            (k * n + c) as u64,
                            b,
                        );
                        xd.add_at(c, k, d);
                    }
                }
                xd
            }
        };

        TrajectoryRecord {
            tau: self.config.tau,
            t_samples: t,
            u,
            w,
            x,
            xd,
            lambda_sq: noise_bound(self.config.noise_bound, n, t),
            seed: self.config.seed,
        }
    }

    /// Realized derivative-estimate error of subsystem `i`, measured against
    /// the true sampled derivatives.
    pub fn realized_noise(&self, i: usize) -> Mat {
        let record = self.record_for(i);
        self.true_derivatives(i).sub(&record.xd)
    }

    pub fn records(&self) -> Vec<TrajectoryRecord> {
        (0..self.trunc.size).map(|i| self.record_for(i)).collect()
    }
}

/// Forward differences: column `k` is `(X[:,k+1] - X[:,k]) / tau`.
pub fn forward_difference(x: &Mat, tau: f64) -> Result<Mat> {
    if x.cols() < 2 {
        return Err(Error::SingleColumn);
    }
    if tau <= 0.0 {
        return Err(Error::InvalidProblem("sampling period must be positive".into()));
    }
    let mut out = Mat::zeros(x.rows(), x.cols() - 1);
    for k in 0..x.cols() - 1 {
        for i in 0..x.rows() {
            out.set(i, k, (x.get(i, k + 1) - x.get(i, k)) / tau);
        }
    }
    Ok(out)
}

/// Noise-energy bound for per-element noise in `[-b, b]`: each column of the
/// noise matrix has squared norm at most `n b^2`, so the energy over `T`
/// samples is bounded by `n b^2 T` times the identity.
pub fn noise_bound(b: f64, n: usize, t: usize) -> SymMatrix {
    SymMatrix::scaled_identity(n, n as f64 * b * b * t as f64)
}

/// Regressor matrices built from one record and the class dictionaries.
#[derive(Debug, Clone)]
pub struct DataMatrices {
    /// N x T drift-dictionary samples.
    pub j: Mat,
    /// M x T input-dictionary samples times inputs.
    pub g: Mat,
    /// (N+M+sigma) x T stack [J; G; W].
    pub q: Mat,
    /// (N+M) x T stack [J; G].
    pub l: Mat,
}

pub fn build_regressors(
    record: &TrajectoryRecord,
    dict_f: &[Monomial],
    dict_g: &PolynomialMatrix,
) -> Result<DataMatrices> {
    let t = record.t_samples;
    if record.x.cols() != t + 1 || record.u.cols() != t || record.w.cols() != t {
        return Err(Error::DimensionMismatch(
            "record column counts are inconsistent".into(),
        ));
    }
    let n_f = dict_f.len();
    let n_g = dict_g.rows();
    if dict_g.cols() != record.u.rows() {
        return Err(Error::DimensionMismatch(format!(
            "input dictionary expects {} inputs, record has {}",
            dict_g.cols(),
            record.u.rows()
        )));
    }
    let mut j = Mat::zeros(n_f, t);
    let mut g = Mat::zeros(n_g, t);
    for k in 0..t {
        let xk = record.x.col(k);
        j.set_col(k, &eval_dictionary(dict_f, &xk)?);
        let gu = dict_g.eval(&xk).matvec(&record.u.col(k));
        g.set_col(k, &gu);
    }
    let l = j.vcat(&g);
    let q = l.vcat(&record.w);
    Ok(DataMatrices { j, g, q, l })
}

/// Consistency matrix for the unknown-interconnection route:
/// `[[Xd Xd^T - LL^T, -Xd Q^T], [*, Q Q^T]]`.
pub fn assemble_z(xd: &Mat, q: &Mat, lambda_sq: &SymMatrix) -> SymMatrix {
    assemble_block(xd, q, lambda_sq)
}

/// Consistency matrix for the known-interconnection route, built on the
/// compensated derivative `Xd - D W` and the reduced stack `L`.
pub fn assemble_y(xd: &Mat, d: &Mat, w: &Mat, l: &Mat, lambda_sq: &SymMatrix) -> SymMatrix {
    let xd_tilde = xd.sub(&d.matmul(w));
    assemble_block(&xd_tilde, l, lambda_sq)
}

fn assemble_block(xd: &Mat, q: &Mat, lambda_sq: &SymMatrix) -> SymMatrix {
    let n = xd.rows();
    let s = q.rows();
    assert_eq!(xd.cols(), q.cols(), "sample counts differ");
    assert_eq!(lambda_sq.dim(), n);
    let mut z = SymMatrix::zeros(n + s);
    for i in 0..n {
        for jj in 0..=i {
            let mut v = 0.0;
            for k in 0..xd.cols() {
                v += xd.get(i, k) * xd.get(jj, k);
            }
            z.set(i, jj, v - lambda_sq.get(i, jj));
        }
    }
    for i in 0..n {
        for jj in 0..s {
            let mut v = 0.0;
            for k in 0..xd.cols() {
                v += xd.get(i, k) * q.get(jj, k);
            }
            z.set(n + jj, i, -v);
        }
    }
    for i in 0..s {
        for jj in 0..=i {
            let mut v = 0.0;
            for k in 0..q.cols() {
                v += q.get(i, k) * q.get(jj, k);
            }
            z.set(n + i, n + jj, v);
        }
    }
    z
}

/// Numerical-rank diagnostic for the sample-count precondition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub rank: usize,
    pub required: usize,
    pub pass: bool,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

pub fn rank_check(m: &Mat, tol: f64) -> RankDiagnostic {
    let sigma = singular_values(m);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let thresh = tol * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > thresh).count();
    RankDiagnostic {
        rank,
        required: m.rows(),
        pass: rank == m.rows(),
        sigma_max,
        sigma_min: sigma.last().copied().unwrap_or(0.0),
    }
}

/// Harness-side: the true parameter stack `S = [A B D]` of a class expressed
/// in the dictionary coordinates, for a subsystem with `card` neighbours.
pub fn true_parameter_stack(class: &SubsystemClass, card: usize) -> Result<Mat> {
    let truth = class
        .truth
        .as_ref()
        .ok_or_else(|| Error::InvalidProblem("no ground truth attached".into()))?;
    let a = embed_drift(truth, &class.dict_f, class.n)?;
    let b = embed_input(truth, &class.dict_g, class.n)?;
    let d = class.assemble_d(card);
    Ok(a.hcat(&b).hcat(&d))
}

/// Reduced stack `R = [A B]` for the known-interconnection route.
pub fn true_reduced_stack(class: &SubsystemClass) -> Result<Mat> {
    let truth = class
        .truth
        .as_ref()
        .ok_or_else(|| Error::InvalidProblem("no ground truth attached".into()))?;
    let a = embed_drift(truth, &class.dict_f, class.n)?;
    let b = embed_input(truth, &class.dict_g, class.n)?;
    Ok(a.hcat(&b))
}

fn embed_drift(truth: &GroundTruth, dict_f: &[Monomial], n: usize) -> Result<Mat> {
    let mut a = Mat::zeros(n, dict_f.len());
    for (c, mono) in truth.f_star_dict.iter().enumerate() {
        let target = dict_f.iter().position(|m| m == mono).ok_or_else(|| {
            Error::InvalidProblem(format!(
                "true drift monomial `{mono}` is missing from the dictionary"
            ))
        })?;
        for r in 0..n {
            a.add_at(r, target, truth.a_star.get(r, c));
        }
    }
    Ok(a)
}

fn embed_input(truth: &GroundTruth, dict_g: &PolynomialMatrix, n: usize) -> Result<Mat> {
    let mut b = Mat::zeros(n, dict_g.rows());
    for c in 0..truth.g_star_dict.rows() {
        let target = (0..dict_g.rows())
            .find(|&r| dict_g.row_equals(r, &truth.g_star_dict, c, 1e-12))
            .ok_or_else(|| {
                Error::InvalidProblem(format!(
                    "true input-dictionary row {c} is missing from the dictionary"
                ))
            })?;
        for r in 0..n {
            b.add_at(r, target, truth.b_star.get(r, c));
        }
    }
    Ok(b)
}

/// Largest eigenvalue of `(Xd - S Q)(Xd - S Q)^T - LL^T`; nonpositive exactly
/// when the parameter stack `S` lies in the data-consistency set.
pub fn consistency_gap(xd: &Mat, q: &Mat, lambda_sq: &SymMatrix, s: &Mat) -> f64 {
    let resid = xd.sub(&s.matmul(q));
    let mut xi = SymMatrix::zeros(xd.rows());
    for i in 0..xd.rows() {
        for j in 0..=i {
            let mut v = 0.0;
            for k in 0..resid.cols() {
                v += resid.get(i, k) * resid.get(j, k);
            }
            xi.set(i, j, v - lambda_sq.get(i, j));
        }
    }
    xi.max_eig()
}

/// Cheap lower bound on the spectral norm of the full consistency matrix,
/// computed in the T-dimensional sample space (the bottom-right principal
/// block `Q Q^T` has the same nonzero spectrum as `Q^T Q`).
pub fn consistency_scale(q: &Mat) -> f64 {
    let small = q.transpose().gram();
    SymMatrix::from_dense(&small).max_eig().max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{instantiate_truncation, NetworkDescriptor};

    fn scalar_decay_class() -> SubsystemClass {
        // one-dimensional subsystems: xdot = -x + w (input has no effect)
        SubsystemClass {
            n: 1,
            m: 1,
            dict_f: vec![Monomial::var(1, 0)],
            dict_g: PolynomialMatrix::identity(1, 1),
            psi_override: None,
            truth: Some(GroundTruth {
                a_star: Mat::from_rows(&[vec![-1.0]]),
                b_star: Mat::from_rows(&[vec![0.0]]),
                f_star_dict: vec![Monomial::var(1, 0)],
                g_star_dict: PolynomialMatrix::identity(1, 1),
            }),
            d_block: Mat::from_rows(&[vec![1.0]]),
            kappa: 0.5,
            vartheta: 0.5,
            varkappa: Some(1.0),
        }
    }

    fn cascade_pair() -> (NetworkDescriptor, TruncatedNetwork) {
        let desc = NetworkDescriptor::homogeneous(scalar_decay_class(), Topology::Cascade);
        let t = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();
        (desc, t)
    }

    #[test]
    fn excite_deterministic_and_in_range() {
        let a = excite(42, 3, 7, 0.5, 4);
        let b = excite(42, 3, 7, 0.5, 4);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.5));
        assert_ne!(excite(42, 3, 8, 0.5, 4), a);
    }

    #[test]
    fn excite_mean_near_zero() {
        let mut sum = 0.0;
        let draws = 10_000;
        for t in 0..draws {
            sum += excite(7, 0, t, 1.0, 1)[0];
        }
        assert!((sum / draws as f64).abs() < 0.05);
    }

    #[test]
    fn integrate_exponential_decay() {
        let (desc, trunc) = cascade_pair();
        let hist = integrate(
            &trunc,
            desc.class(),
            &InputPolicy::Zero,
            &[vec![1.0], vec![0.0]],
            0.1,
            10,
            10,
        )
        .unwrap();
        let x1_end = hist.states[10][0][0];
        assert!((x1_end - (-1.0_f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn integrate_zero_dynamics_constant() {
        let mut class = scalar_decay_class();
        class.truth.as_mut().unwrap().a_star = Mat::from_rows(&[vec![0.0]]);
        class.d_block = Mat::from_rows(&[vec![0.0]]);
        let desc = NetworkDescriptor::homogeneous(class, Topology::Cascade);
        let trunc = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();
        let hist = integrate(
            &trunc,
            desc.class(),
            &InputPolicy::Zero,
            &[vec![3.5], vec![-2.0]],
            0.1,
            10,
            5,
        )
        .unwrap();
        for s in &hist.states {
            assert_eq!(s[0][0], 3.5);
            assert_eq!(s[1][0], -2.0);
        }
    }

    #[test]
    fn integrate_cascade_variation_of_constants() {
        // x1dot = -x1, x2dot = -x2 + x1, x(0) = (1, 0)  =>  x2(t) = t e^{-t}
        let (desc, trunc) = cascade_pair();
        let hist = integrate(
            &trunc,
            desc.class(),
            &InputPolicy::Zero,
            &[vec![1.0], vec![0.0]],
            0.1,
            10,
            10,
        )
        .unwrap();
        let x2_end = hist.states[10][1][0];
        assert!((x2_end - (-1.0_f64).exp()).abs() < 1e-6, "got {x2_end}");
    }

    #[test]
    fn collect_single_sample_constant_dynamics() {
        let mut class = scalar_decay_class();
        class.truth.as_mut().unwrap().a_star = Mat::from_rows(&[vec![0.0]]);
        class.d_block = Mat::from_rows(&[vec![0.0]]);
        let desc = NetworkDescriptor::homogeneous(class, Topology::Cascade);
        let trunc = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();
        let coll = collect(
            &trunc,
            desc.class(),
            CollectConfig {
                t_samples: 1,
                tau: 0.1,
                substeps: 10,
                noise_bound: 0.0,
                noise_mode: NoiseMode::Explicit,
                seed: 1,
                amplitude: 1.0,
                x0_magnitude: 1.0,
            },
        )
        .unwrap();
        let rec = coll.record_for(0);
        assert_eq!(rec.xd.get(0, 0), 0.0);
    }

    #[test]
    fn collect_wires_neighbour_states() {
        let (desc, trunc) = cascade_pair();
        let coll = collect(
            &trunc,
            desc.class(),
            CollectConfig {
                t_samples: 5,
                tau: 0.05,
                substeps: 10,
                noise_bound: 0.001,
                noise_mode: NoiseMode::Explicit,
                seed: 3,
                amplitude: 0.5,
                x0_magnitude: 0.5,
            },
        )
        .unwrap();
        let rec1 = coll.record_for(0);
        let rec2 = coll.record_for(1);
        // W of the second subsystem equals X of the first, columns 0..T-1
        for k in 0..5 {
            assert_eq!(rec2.w.get(0, k), rec1.x.get(0, k));
        }
        // sigma consistency with the descriptor rule
        assert_eq!(rec2.w.rows(), desc.sigma_dim(2));
    }

    #[test]
    fn forward_difference_shapes_and_values() {
        let x = Mat::from_rows(&[vec![1.0, 1.0, 1.0]]);
        let d = forward_difference(&x, 0.1).unwrap();
        assert_eq!(d.cols(), 2);
        assert_eq!(d.get(0, 0), 0.0);

        // linear trajectory x(t) = t sampled at tau: exact derivative
        let x = Mat::from_rows(&[vec![0.0, 0.1, 0.2, 0.3]]);
        let d = forward_difference(&x, 0.1).unwrap();
        for k in 0..3 {
            assert!((d.get(0, k) - 1.0).abs() < 1e-12);
        }

        assert!(forward_difference(&Mat::zeros(1, 1), 0.1).is_err());
    }

    #[test]
    fn forward_difference_quadratic_error_is_tau() {
        // x(t) = t^2 at t = 0: estimate (tau^2 - 0)/tau = tau, true derivative 0
        let tau = 0.1;
        let x = Mat::from_rows(&[vec![0.0, tau * tau]]);
        let d = forward_difference(&x, tau).unwrap();
        assert!((d.get(0, 0) - tau).abs() < 1e-15);
    }

    #[test]
    fn noise_bound_case_study_values() {
        let cases: [(usize, f64, usize, f64); 6] = [
            (3, 0.01, 70, 0.021),
            (3, 0.01, 50, 0.015),
            (3, 0.001, 25, 0.75e-4),
            (3, 0.001, 80, 2.4e-4),
            (2, 0.01, 21, 0.0042),
            (2, 0.01, 50, 0.01),
        ];
        for (n, b, t, want) in cases {
            let m = noise_bound(b, n, t);
            for i in 0..n {
                assert!((m.get(i, i) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assemble_z_scalar_toy() {
        let xd = Mat::from_rows(&[vec![1.0]]);
        let q = Mat::from_rows(&[vec![2.0]]);
        let lam = SymMatrix::diag(&[0.25]);
        let z = assemble_z(&xd, &q, &lam);
        assert_eq!(z.get(0, 0), 0.75);
        assert_eq!(z.get(1, 0), -2.0);
        assert_eq!(z.get(1, 1), 4.0);
    }

    #[test]
    fn assemble_z_zero_data() {
        let xd = Mat::zeros(1, 3);
        let q = Mat::zeros(2, 3);
        let lam = SymMatrix::diag(&[0.5]);
        let z = assemble_z(&xd, &q, &lam);
        assert_eq!(z.get(0, 0), -0.5);
        assert_eq!(z.get(1, 1), 0.0);
        assert_eq!(z.get(2, 2), 0.0);
    }

    #[test]
    fn assemble_y_scalar_toy() {
        let xd = Mat::from_rows(&[vec![3.0]]);
        let d = Mat::from_rows(&[vec![1.0]]);
        let w = Mat::from_rows(&[vec![1.0]]);
        let l = Mat::from_rows(&[vec![2.0]]);
        let lam = SymMatrix::diag(&[1.0]);
        let y = assemble_y(&xd, &d, &w, &l, &lam);
        assert_eq!(y.get(0, 0), 3.0);
        assert_eq!(y.get(1, 0), -4.0);
        assert_eq!(y.get(1, 1), 4.0);
    }

    #[test]
    fn rank_check_basics() {
        let full = rank_check(&Mat::identity(3), 1e-9);
        assert!(full.pass && full.rank == 3);

        let dup = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let deficient = rank_check(&dup, 1e-9);
        assert!(!deficient.pass && deficient.rank == 1);
    }

    #[test]
    fn membership_certificate_small_cascade() {
        let (desc, trunc) = cascade_pair();
        let class = desc.class();
        let coll = collect(
            &trunc,
            class,
            CollectConfig {
                t_samples: 8,
                tau: 0.05,
                substeps: 20,
                noise_bound: 0.01,
                noise_mode: NoiseMode::Explicit,
                seed: 11,
                amplitude: 1.0,
                x0_magnitude: 1.0,
            },
        )
        .unwrap();
        let rec = coll.record_for(1);
        let dm = build_regressors(&rec, &class.dict_f, &class.dict_g).unwrap();
        let s_true = true_parameter_stack(class, 1).unwrap();
        let gap = consistency_gap(&rec.xd, &dm.q, &rec.lambda_sq, &s_true);
        assert!(gap <= 0.0, "gap = {gap}");

        // cross-check against the literal quadratic form on the assembled Z
        let z = assemble_z(&rec.xd, &dm.q, &rec.lambda_sq);
        let n = class.n;
        let st = s_true.transpose();
        let stack = Mat::identity(n).vcat(&st);
        let xi = stack.transpose().matmul(&z.to_dense()).matmul(&stack);
        let gap2 = SymMatrix::from_dense(&xi).max_eig();
        assert!((gap - gap2).abs() < 1e-9 * (1.0 + gap.abs()));
    }

    #[test]
    fn realized_noise_within_bound() {
        let (desc, trunc) = cascade_pair();
        let coll = collect(
            &trunc,
            desc.class(),
            CollectConfig {
                t_samples: 10,
                tau: 0.05,
                substeps: 20,
                noise_bound: 0.01,
                noise_mode: NoiseMode::Explicit,
                seed: 5,
                amplitude: 1.0,
                x0_magnitude: 1.0,
            },
        )
        .unwrap();
        for i in 0..2 {
            let delta = coll.realized_noise(i);
            assert!(delta.max_abs() <= 0.01 + 1e-15);
        }
    }
}
