//! Subsystem classes, interconnection topology, and finite truncations of the
//! (conceptually infinite) network.
//!
//! Ground-truth dynamics live behind a harness firewall: the synthesis module
//! never sees a [`GroundTruth`] value — its interfaces accept only trajectory
//! records and dictionary data. Simulation entry points in `datagen` and the
//! oracle certifiers are the only consumers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polycore::{spectral_norm, Mat, Monomial, PolynomialMatrix};

/// True dynamics of a subsystem class, known only to the test harness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Constant system matrix over `f_star_dict` (n x N*).
    pub a_star: Mat,
    /// Constant control matrix over `g_star_dict` rows (n x M*).
    pub b_star: Mat,
    /// True monomial structure of the drift.
    pub f_star_dict: Vec<Monomial>,
    /// True monomial structure of the input matrix (M* x m).
    pub g_star_dict: PolynomialMatrix,
}

/// One homogeneous class of subsystems: dimensions, dictionaries, the uniform
/// interconnection block, and the synthesis constants attached to the class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsystemClass {
    pub n: usize,
    pub m: usize,
    /// Drift dictionary (N entries, no degree-0 monomial).
    pub dict_f: Vec<Monomial>,
    /// Input dictionary template (M x m polynomial matrix).
    pub dict_g: PolynomialMatrix,
    /// Optional hand-picked transformation matrix.
    pub psi_override: Option<PolynomialMatrix>,
    /// Harness-only true dynamics.
    pub truth: Option<GroundTruth>,
    /// Uniform interconnection block applied to every neighbour (n x n).
    pub d_block: Mat,
    pub kappa: f64,
    pub vartheta: f64,
    /// Known upper bound on the spectral norm of the assembled `D_i`.
    pub varkappa: Option<f64>,
}

impl SubsystemClass {
    pub fn n_dict_f(&self) -> usize {
        self.dict_f.len()
    }

    pub fn n_dict_g(&self) -> usize {
        self.dict_g.rows()
    }

    /// `D_i` for a subsystem with `card` neighbours: the horizontal
    /// concatenation of the class block, one copy per neighbour.
    pub fn assemble_d(&self, card: usize) -> Mat {
        let mut d = Mat::zeros(self.n, self.n * card);
        for c in 0..card {
            for i in 0..self.n {
                for j in 0..self.d_block.cols() {
                    d.set(i, c * self.n + j, self.d_block.get(i, j));
                }
            }
        }
        d
    }

    /// Validate the class: dictionary degrees and, in harness mode, that the
    /// declared norm bound actually dominates the assembled interconnection
    /// matrix.
    pub fn validate(&self, card: usize) -> Result<()> {
        for (i, m) in self.dict_f.iter().enumerate() {
            if m.total_degree() == 0 {
                return Err(Error::DegreeZeroMonomial { index: i });
            }
        }
        if self.truth.is_some() {
            if let Some(vk) = self.varkappa {
                let norm = spectral_norm(&self.assemble_d(card));
                if vk < norm {
                    return Err(Error::InvalidProblem(format!(
                        "declared norm bound {vk} is below the assembled interconnection norm {norm}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Interconnection families used by the case studies. `Cascade` couples each
/// subsystem to its predecessor; `ForwardBand(K)` couples each subsystem to
/// its `K` successors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Topology {
    Cascade,
    ForwardBand { k: usize },
}

impl Topology {
    /// Neighbourhood cardinality of the infinite-network rule.
    pub fn card(&self) -> usize {
        match self {
            Topology::Cascade => 1,
            Topology::ForwardBand { k } => *k,
        }
    }
}

/// How a finite truncation treats neighbours that fall outside `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Drop out-of-range neighbours.
    Clip,
    /// Wrap indices modulo the truncation size.
    Wrap,
}

/// Description of a homogeneous network: one class list (a constant
/// class-of rule maps every subsystem to class 0) plus the topology family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkDescriptor {
    pub classes: Vec<SubsystemClass>,
    pub topology: Topology,
}

impl NetworkDescriptor {
    pub fn homogeneous(class: SubsystemClass, topology: Topology) -> Self {
        NetworkDescriptor {
            classes: vec![class],
            topology,
        }
    }

    /// Constant rule: every subsystem belongs to class 0.
    pub fn class_of(&self, _i: usize) -> usize {
        0
    }

    pub fn class(&self) -> &SubsystemClass {
        &self.classes[0]
    }

    /// Neighbourhood cardinality of the infinite rule for this class.
    pub fn card(&self) -> usize {
        self.topology.card()
    }

    /// Total neighbour state dimension for subsystem `i` (1-based) under the
    /// infinite-network rule.
    pub fn sigma_dim(&self, i: usize) -> usize {
        let n = self.class().n;
        match self.topology {
            Topology::Cascade => {
                if i >= 2 {
                    n
                } else {
                    0
                }
            }
            Topology::ForwardBand { k } => k * n,
        }
    }
}

/// A finite `N`-subsystem realization of the network with resolved neighbour
/// lists; the adversarial-input wiring `w_ij = x_j` is recorded as these
/// index pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncatedNetwork {
    pub size: usize,
    pub boundary: Boundary,
    pub topology: Topology,
    /// 0-based neighbour lists, one per subsystem.
    neighbors: Vec<Vec<usize>>,
}

impl TruncatedNetwork {
    /// Neighbours of subsystem `i` (0-based), in wiring order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn card(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// First subsystem whose neighbour count matches the infinite-network
    /// cardinality; data collection uses it as the class representative.
    pub fn representative(&self) -> Option<usize> {
        let want = self.topology.card();
        (0..self.size).find(|&i| self.neighbors[i].len() == want)
    }
}

/// Realize the topology rule on `n_subsystems` subsystems under the boundary
/// policy.
pub fn instantiate_truncation(
    desc: &NetworkDescriptor,
    n_subsystems: usize,
    boundary: Boundary,
) -> Result<TruncatedNetwork> {
    if n_subsystems < 2 {
        return Err(Error::TruncationTooSmall {
            size: n_subsystems,
            card: desc.card(),
        });
    }
    if boundary == Boundary::Wrap && n_subsystems <= desc.card() {
        return Err(Error::TruncationTooSmall {
            size: n_subsystems,
            card: desc.card(),
        });
    }
    let mut neighbors = Vec::with_capacity(n_subsystems);
    for i in 0..n_subsystems {
        // 1-based index arithmetic, mapped back to 0-based storage
        let idx = i + 1;
        let mut list = Vec::new();
        match desc.topology {
            Topology::Cascade => {
                if idx >= 2 {
                    list.push(idx - 2);
                } else if boundary == Boundary::Wrap {
                    list.push(n_subsystems - 1);
                }
            }
            Topology::ForwardBand { k } => {
                for offset in 1..=k {
                    let j = idx + offset;
                    match boundary {
                        Boundary::Clip => {
                            if j <= n_subsystems {
                                list.push(j - 1);
                            }
                        }
                        Boundary::Wrap => {
                            let wrapped = (j - 1) % n_subsystems;
                            list.push(wrapped);
                        }
                    }
                }
            }
        }
        debug_assert!(!list.contains(&i), "self-loop in neighbour list");
        neighbors.push(list);
    }
    Ok(TruncatedNetwork {
        size: n_subsystems,
        boundary,
        topology: desc.topology,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polycore::PolynomialMatrix;

    fn planar_class() -> SubsystemClass {
        SubsystemClass {
            n: 2,
            m: 1,
            dict_f: vec![Monomial::var(2, 0), Monomial::var(2, 1)],
            dict_g: PolynomialMatrix::identity(1, 2),
            psi_override: None,
            truth: None,
            d_block: Mat::zeros(2, 2),
            kappa: 0.5,
            vartheta: 0.5,
            varkappa: None,
        }
    }

    fn three_dim_class() -> SubsystemClass {
        SubsystemClass {
            n: 3,
            ..{
                let mut c = planar_class();
                c.dict_f = vec![Monomial::var(3, 0)];
                c.d_block = Mat::zeros(3, 3);
                c
            }
        }
    }

    #[test]
    fn cascade_clip() {
        let desc = NetworkDescriptor::homogeneous(planar_class(), Topology::Cascade);
        let t = instantiate_truncation(&desc, 5, Boundary::Clip).unwrap();
        assert!(t.neighbors(0).is_empty());
        for i in 1..5 {
            assert_eq!(t.neighbors(i), &[i - 1]);
        }
    }

    #[test]
    fn forward_band_clip() {
        let desc =
            NetworkDescriptor::homogeneous(planar_class(), Topology::ForwardBand { k: 2 });
        let t = instantiate_truncation(&desc, 4, Boundary::Clip).unwrap();
        assert_eq!(t.neighbors(0), &[1, 2]);
        assert_eq!(t.neighbors(1), &[2, 3]);
        assert_eq!(t.neighbors(2), &[3]);
        assert!(t.neighbors(3).is_empty());
    }

    #[test]
    fn forward_band_wrap() {
        let desc =
            NetworkDescriptor::homogeneous(planar_class(), Topology::ForwardBand { k: 2 });
        let t = instantiate_truncation(&desc, 4, Boundary::Wrap).unwrap();
        // 1-based: M_3 = {4, 1}, M_4 = {1, 2}
        assert_eq!(t.neighbors(2), &[3, 0]);
        assert_eq!(t.neighbors(3), &[0, 1]);
        for i in 0..4 {
            assert_eq!(t.card(i), 2);
        }
    }

    #[test]
    fn wrap_needs_room() {
        let desc =
            NetworkDescriptor::homogeneous(planar_class(), Topology::ForwardBand { k: 4 });
        assert!(instantiate_truncation(&desc, 4, Boundary::Wrap).is_err());
    }

    #[test]
    fn no_self_loops_and_clip_monotone() {
        let desc =
            NetworkDescriptor::homogeneous(planar_class(), Topology::ForwardBand { k: 3 });
        let small = instantiate_truncation(&desc, 5, Boundary::Clip).unwrap();
        let large = instantiate_truncation(&desc, 6, Boundary::Clip).unwrap();
        for i in 0..5 {
            assert!(!small.neighbors(i).contains(&i));
            // growing the truncation never removes an edge
            for j in small.neighbors(i) {
                assert!(large.neighbors(i).contains(j));
            }
        }
    }

    #[test]
    fn sigma_dims() {
        let c3 = three_dim_class();
        let cascade = NetworkDescriptor::homogeneous(c3.clone(), Topology::Cascade);
        assert_eq!(cascade.sigma_dim(2), 3);
        assert_eq!(cascade.sigma_dim(1), 0);

        let dense = NetworkDescriptor::homogeneous(c3, Topology::ForwardBand { k: 1800 });
        assert_eq!(dense.sigma_dim(1), 5400);

        let band5 = NetworkDescriptor::homogeneous(planar_class(), Topology::ForwardBand { k: 5 });
        assert_eq!(band5.sigma_dim(7), 10);
    }

    #[test]
    fn representative_has_full_neighbourhood() {
        let desc = NetworkDescriptor::homogeneous(planar_class(), Topology::Cascade);
        let t = instantiate_truncation(&desc, 3, Boundary::Clip).unwrap();
        assert_eq!(t.representative(), Some(1));
    }
}
