//! Heat-flow coordinate transform on a box with zero-flux walls.
//!
//! A density is expanded in cosine modes, each mode decays independently
//! under the heat equation, and points are carried along the probability
//! flux so that an ensemble drawn from `p` relaxes toward the uniform law.

mod expansion;
mod invariant;
mod inverse;
mod transform;

pub use expansion::{cosine_expand, cosine_expand_field, heat_evolve, heat_evolve_field, CosineExpansion};
pub use invariant::equipartition_residual;
pub use inverse::{diffusion_time, gradient_l1_norm, inverse_select, PowerModel, Selection};
pub use transform::transform_points;
