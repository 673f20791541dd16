//! Learning the event density while allocating against it.
//!
//! Discrete events use a Dirichlet prior over categories with the conjugate
//! count update; the allocation follows its own relaxation ODE driven by the
//! current posterior predictive. Continuous nonstationary events are tracked
//! with a Gaussian kernel estimate over (x, t) pairs, checked against the
//! Wiener process whose density is known in closed form.

mod categorical;
mod kde;
mod wiener;

pub use categorical::{
    dynamic_allocation_step, posterior_predictive, posterior_update, replay_allocation, AllocationSnapshot,
    DirichletPosterior, ObservationStream,
};
pub use kde::{bandwidth_schedule, SpacetimeKDE, DEFAULT_BANDWIDTH_SCALE};
pub use wiener::{wiener_density, wiener_sample_paths, PathRecord, WienerSpec};
