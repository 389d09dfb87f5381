//! Data-driven synthesis of ISS Lyapunov functions and stabilizing polynomial
//! controllers for subsystems of large homogeneous networks, composed into a
//! network-level control Lyapunov function through a small-gain condition.
//!
//! The pipeline, end to end:
//!
//! 1. [`datagen`] excites a truncated network and collects one noisy
//!    input–state trajectory per subsystem, together with the data matrices
//!    and consistency certificates the synthesis stage consumes.
//! 2. [`synthesis`] compiles the data-driven matrix inequality into a
//!    sum-of-squares program, solves it with the interior-point solver in
//!    [`sdpsolve`], and recovers the Lyapunov matrix, controller, and ISS
//!    constants.
//! 3. [`composition`] assembles the gain operator, checks the small-gain
//!    condition through its column-sum bound, and produces the network CLF.
//!
//! [`polycore`] and [`network`] supply the polynomial algebra and network
//! descriptions underneath.

pub mod composition;
pub mod datagen;
pub mod error;
pub mod network;
pub mod polycore;
pub mod sdpsolve;
pub mod synthesis;

pub use error::{Error, Result};
pub use polycore::{Mat, Monomial, Poly, PolynomialMatrix, SymMatrix};
