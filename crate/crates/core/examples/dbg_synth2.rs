use clfnet_core::datagen::{self, collect, CollectConfig, NoiseMode};
use clfnet_core::network::{instantiate_truncation, Boundary, GroundTruth, NetworkDescriptor, SubsystemClass, Topology};
use clfnet_core::polycore::{factor_transformation, singular_values, Mat, Monomial, Poly, PolynomialMatrix, SymMatrix};
use clfnet_core::synthesis::{self, SynthesisProblem};

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
    eprintln!("Q singular values: {:?}", singular_values(&data.q));
    eprintln!("Xd*Xd' = {:?}", rec.xd.gram().get(0,0));
    let psi = factor_transformation(&desc.class().dict_f, 1, None).unwrap();
    let problem = SynthesisProblem::unknown_interconnection(desc.class(), &rec, &data, psi, 0, 0).unwrap();

    let phi = SymMatrix::diag(&[1.0]);
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0.0, 0.0);
    for ki in 0..400 {
        let kv = -(1.06_f64.powi(ki)) * 0.01; // -0.01 .. -~1e8
        if kv < -1e6 { break; }
        let k = PolynomialMatrix::from_constant(&Mat::from_rows(&[vec![kv]]), 1);
        for gi in 0..300 {
            let g = 1e-3 * 1.06_f64.powi(gi);
            if g > 1e5 { break; }
            let gamma = Poly::constant(1, g);
            let s = synthesis::condition_matrix(&problem, &phi, &k, &gamma, &[0.0]);
            let me = s.min_eig();
            if me > best { best = me; best_pair = (kv, g); }
        }
    }
    eprintln!("best hand min-eig {best:.4e} at (k, gamma) = {best_pair:?}");
}
