//! Stable states, transition paths and solution landscapes of the
//! Landau-de Gennes Q-tensor model for confined nematic liquid crystals.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: pointwise Q-tensor algebra, bulk energy, critical points.
//! - [`field`]: finite-difference energy on the unit square with tangent
//!   Dirichlet data.
//! - [`objective`]: the energy trait the solvers work against, plus analytic
//!   toy potentials.
//! - [`eigen`]: smallest Hessian eigenpairs by block LOBPCG, Morse index.
//! - [`minimize`]: L-BFGS with Armijo backtracking and stability certificates.
//! - [`flow`]: second-order SAV and semi-implicit gradient flows.
//! - [`string`]: string method for minimal energy paths.
//! - [`hisd`] and [`landscape`]: high-index saddle dynamics and the
//!   downward/upward search graph.
//! - [`maier_saupe`]: homogeneous Maier-Saupe branches and Leslie coefficients.
//! - [`hedgehog`]: radial hedgehog profile.
//! - [`io`]: CSV/JSON persistence.

pub mod eigen;
pub mod error;
pub mod field;
pub mod flow;
pub mod hedgehog;
pub mod hisd;
pub mod io;
pub mod landscape;
pub mod maier_saupe;
pub mod minimize;
pub mod objective;
pub mod quadrature;
pub mod string;
pub mod tensor;
pub mod vecops;

pub use error::{Error, Result};
pub use field::{BoundaryCondition, Domain, ElasticParams, QField, Seed};
pub use objective::Objective;
pub use tensor::{BulkParams, QTensor};
