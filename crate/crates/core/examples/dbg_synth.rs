use clfnet_core::datagen::{self, collect, CollectConfig, NoiseMode};
use clfnet_core::network::{instantiate_truncation, Boundary, GroundTruth, NetworkDescriptor, SubsystemClass, Topology};
use clfnet_core::polycore::{factor_transformation, Mat, Monomial, Poly, PolynomialMatrix, SymMatrix};
use clfnet_core::synthesis::{self, SynthesisProblem};
use clfnet_core::sdpsolve::{self, SolverConfig};

fn main() {
    let class = SubsystemClass {
        n: 1, m: 1,
        dict_f: vec![Monomial::var(1, 0)],
        dict_g: PolynomialMatrix::identity(1, 1),
        psi_override: None,
        truth: Some(GroundTruth {
            a_star: Mat::from_rows(&[vec![0.5]]),
            b_star: Mat::from_rows(&[vec![1.0]]),
            f_star_dict: vec![Monomial::var(1, 0)],
            g_star_dict: PolynomialMatrix::identity(1, 1),
        }),
        d_block: Mat::from_rows(&[vec![0.1]]),
        kappa: 0.5, vartheta: 0.5, varkappa: Some(0.12),
    };
    let desc = NetworkDescriptor::homogeneous(class, Topology::Cascade);
    let trunc = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();
    let coll = collect(&trunc, desc.class(), CollectConfig {
        t_samples: 12, tau: 0.05, substeps: 20, noise_bound: 1e-3,
        noise_mode: NoiseMode::Explicit, seed: 7, amplitude: 1.0, x0_magnitude: 1.0,
    }).unwrap();
    let rec = coll.record_for(1);
    let data = datagen::build_regressors(&rec, &desc.class().dict_f, &desc.class().dict_g).unwrap();
    let psi = factor_transformation(&desc.class().dict_f, 1, None).unwrap();
    let problem = SynthesisProblem::unknown_interconnection(desc.class(), &rec, &data, psi, 0, 0).unwrap();

    // membership check
    let s_true = datagen::true_parameter_stack(desc.class(), 1).unwrap();
    let gap = datagen::consistency_gap(&rec.xd, &data.q, &rec.lambda_sq, &s_true);
    eprintln!("membership gap (should be <= 0): {gap:.3e}");

    // hand-search feasibility: Phi = 1, k sweep, gamma sweep
    let phi = SymMatrix::diag(&[1.0]);
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0.0, 0.0);
    for ki in -80..0 {
        let kv = ki as f64 * 0.25;
        let k = PolynomialMatrix::from_constant(&Mat::from_rows(&[vec![kv]]), 1);
        for gi in 1..200 {
            let g = gi as f64 * 0.02;
            let gamma = Poly::constant(1, g);
            let s = synthesis::condition_matrix(&problem, &phi, &k, &gamma, &[0.0]);
            let me = s.min_eig();
            if me > best { best = me; best_pair = (kv, g); }
        }
    }
    eprintln!("best hand min-eig {best:.4e} at (k, gamma) = {best_pair:?}");

    let compiled = synthesis::compile_condition(&problem).unwrap();
    eprintln!("compiled: dims {:?} free {} eqs {}", compiled.sdp.block_dims, compiled.sdp.n_free, compiled.sdp.equalities.len());
    std::env::set_var("CLFNET_SDP_TRACE", "1");
    let mut cfg = SolverConfig::default(); cfg.t_max = 2.5e-4;
    let m = sdpsolve::solve_feasibility_with_margin(&compiled.sdp, &cfg).unwrap();
    eprintln!("margin solve: status {:?} margin {} clamped {}", m.solution.status, m.margin, m.clamped);
}
