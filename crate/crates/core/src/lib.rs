//! Numerical toolkit for constrained resource-allocation problems whose optima
//! equalize a constraint-weighted marginal benefit across the domain.
//!
//! The crate is organised by problem family:
//!
//! - [`domain`]: box domains, lattice fields, densities, quadrature and seeded sampling.
//! - [`static_solver`]: closed-form and numeric static optima, HOT lattices, k-medians.
//! - [`diffusion`]: the heat-flow coordinate transform, the invariant check and
//!   inverse selection of the governing density.
//! - [`dynamics`]: Hamiltonian, damped and overdamped allocation dynamics.
//! - [`inference`]: Dirichlet–Categorical updating, dynamic allocation, spacetime KDE.
//! - [`misspec`]: cost of optimizing for the wrong density.
//! - [`network`]: allocation on undirected graphs.
//! - [`annealer`]: generic simulated annealing.

pub mod annealer;
pub mod diffusion;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod inference;
pub mod misspec;
pub mod network;
pub mod rng;
pub mod static_solver;
pub mod stats;

pub use error::{Error, Result};
