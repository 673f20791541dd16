//! Domains, lattice fields and densities shared by every solver.
//!
//! A domain is an explicit list of disjoint axis-aligned boxes, so disconnected
//! regions keep exact cell volumes. Fields are piecewise constant on a regular
//! lattice inside each box and all integrals use the midpoint rule, which is
//! exact for that representation.

mod grid;
mod io;
mod problem;
mod sampling;

pub use grid::{integrate, normalize_density, AxisBox, BoxDomain, DensityField, GridField};
pub use io::{format_real, grid_field_to_string, parse_grid_field, read_grid_field, write_grid_field};
pub use problem::{
    gradient_step, ConstraintFamily, ConstraintKind, LossFamily, Sense, VariationalProblem, POSITIVITY_FLOOR,
};
pub use sampling::{sample_density, sample_uniform_in_domain};
