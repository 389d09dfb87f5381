use clfnet_core::datagen::{self, collect, CollectConfig, NoiseMode};
use clfnet_core::network::{instantiate_truncation, Boundary, GroundTruth, NetworkDescriptor, SubsystemClass, Topology};
use clfnet_core::polycore::{factor_transformation, Mat, Monomial, Poly, PolynomialMatrix};
use clfnet_core::synthesis::{self, SynthesisProblem};
use clfnet_core::sdpsolve::SolverConfig;
use clfnet_core::composition::{self, GainModel};
use std::time::Instant;

fn mono(e: &[u32]) -> Monomial { Monomial::new(e.to_vec()) }

fn main() {
    // rigid-body attitude subsystem, principal inertias (200, 150, 100)
    let (j1, j2, j3) = (200.0, 150.0, 100.0);
    let dict_f = vec![
        mono(&[1,0,0]), mono(&[0,1,0]), mono(&[0,0,1]),
        mono(&[1,1,0]), mono(&[0,1,1]), mono(&[1,0,1]),
    ];
    let mut psi = PolynomialMatrix::zeros(6, 3, 3);
    for i in 0..3 { psi.set(i, i, Poly::constant(3, 1.0)); }
    psi.set(3, 0, Poly::var(3, 1));
    psi.set(4, 1, Poly::var(3, 2));
    psi.set(5, 2, Poly::var(3, 0));
    let d_block = Mat::from_rows(&[
        vec![0.0, 0.0, -1e-4],
        vec![-1e-4, 0.0, 0.0],
        vec![0.0, -1e-4, 0.0],
    ]);
    let class = SubsystemClass {
        n: 3, m: 3,
        dict_f: dict_f.clone(),
        dict_g: PolynomialMatrix::identity(3, 3),
        psi_override: Some(psi.clone()),
        truth: Some(GroundTruth {
            a_star: Mat::from_rows(&[
                vec![(j2 - j3) / j1, 0.0, 0.0],
                vec![0.0, (j3 - j1) / j2, 0.0],
                vec![0.0, 0.0, (j1 - j2) / j3],
            ]),
            b_star: Mat::from_rows(&[
                vec![1.0 / j1, 0.0, 0.0],
                vec![0.0, 1.0 / j2, 0.0],
                vec![0.0, 0.0, 1.0 / j3],
            ]),
            f_star_dict: vec![mono(&[0,1,1]), mono(&[1,0,1]), mono(&[1,1,0])],
            g_star_dict: PolynomialMatrix::identity(3, 3),
        }),
        d_block,
        kappa: 0.1, vartheta: 1.0, varkappa: Some(0.05),
    };
    let desc = NetworkDescriptor::homogeneous(class, Topology::Cascade);
    let trunc = instantiate_truncation(&desc, 2, Boundary::Clip).unwrap();

    let t0 = Instant::now();
    let coll = collect(&trunc, desc.class(), CollectConfig {
        t_samples: 70, tau: 0.1, substeps: 20, noise_bound: 0.01,
        noise_mode: NoiseMode::Explicit, seed: 1, amplitude: 1.0, x0_magnitude: 1.0,
    }).unwrap();
    let rec = coll.record_for(1);
    eprintln!("collect: {:?}  shapes U {}x{} W {}x{} X {}x{} Xd {}x{}",
        t0.elapsed(), rec.u.rows(), rec.u.cols(), rec.w.rows(), rec.w.cols(),
        rec.x.rows(), rec.x.cols(), rec.xd.rows(), rec.xd.cols());

    let data = datagen::build_regressors(&rec, &desc.class().dict_f, &desc.class().dict_g).unwrap();
    let diag = datagen::rank_check(&data.q, 1e-9);
    eprintln!("rank: {}/{} pass={} sig [{:.3e}, {:.3e}]", diag.rank, diag.required, diag.pass, diag.sigma_max, diag.sigma_min);
    let s_true = datagen::true_parameter_stack(desc.class(), 1).unwrap();
    let gap = datagen::consistency_gap(&rec.xd, &data.q, &rec.lambda_sq, &s_true);
    eprintln!("membership gap: {gap:.3e}");

    let psi_v = factor_transformation(&desc.class().dict_f, 3, desc.class().psi_override.clone()).unwrap();
    let problem = SynthesisProblem::unknown_interconnection(desc.class(), &rec, &data, psi_v, 1, 2).unwrap();
    let compiled = synthesis::compile_condition(&problem).unwrap();
    eprintln!("compiled: dim {} blocks {:?} free {} eqs {}",
        compiled.condition_dim, compiled.sdp.block_dims, compiled.sdp.n_free, compiled.sdp.equalities.len());

    let t1 = Instant::now();
    match synthesis::solve_synthesis(&problem, &SolverConfig::default()) {
        Ok((result, ms)) => {
            eprintln!("solve: {:?}  iters {} margin {:.3e} clamped {}", t1.elapsed(), ms.solution.iterations, ms.margin, ms.clamped);
            eprintln!("alpha_lo {:.4e} alpha_hi {:.4e} rho {:.4e}", result.alpha_lo, result.alpha_hi, result.rho);
            let t2 = Instant::now();
            let grid = synthesis::verify_sos_residual(&problem, &result, 1.0, 7);
            eprintln!("grid({:?}): min_eig {:.3e} rel {:.3e} pass {}", t2.elapsed(), grid.min_eig, grid.min_eig_rel, grid.pass);
            let oracle = synthesis::certify_iss_oracle(desc.class(), &result, 1, 1000, 1.0, 1.0, 3, 1e-6).unwrap();
            eprintln!("oracle: worst {:.3e} pass {}", oracle.worst_slack, oracle.pass);
            let gm = GainModel::from_result(&result, Topology::Cascade).unwrap();
            let sg = composition::small_gain(&gm).unwrap();
            eprintln!("gain: omega {:.4e} norm11 {:.4} pass {}", sg.omega_entry, sg.norm11, sg.pass);
        }
        Err(e) => eprintln!("solve FAILED after {:?}: {e}", t1.elapsed()),
    }
}
