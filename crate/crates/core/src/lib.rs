//! Factorization-free trajectory optimization: prox-linear sequential convex
//! programming with continuous-time constraint satisfaction, a customized
//! PIPG conic QP solver and a parallel Monte Carlo harness.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`). The batch and
//! I/O layers work in `f64`; the aliases below name the common instances.

pub mod config;
pub mod ctcs;
pub mod discretizer;
pub mod error;
pub mod montecarlo;
pub mod pipg;
pub mod report;
pub mod rocket6dof;
pub mod scalar;
pub mod scp;
pub mod smallmat;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat = smallmat::DenseMat<f64>;
pub type Vector = smallmat::DenseVec<f64>;
pub type Vehicle = rocket6dof::Rocket6Dof<f64>;
pub type Params = rocket6dof::VehicleParams<f64>;
pub type RocketSystem = ctcs::Ctcs<Vehicle>;
