//! Allocation on undirected graphs.
//!
//! Resources sit on edges (neighborhood contagion and lossy subgraphs) or on
//! nodes (HOT on networks). Every edge is stored once, as an unordered pair,
//! and all normalizations run over unordered edges.

mod graph;
mod hot;
mod neighborhood;
mod subgraph;

pub use graph::{barabasi_albert, erdos_renyi, load_edge_list, parse_edge_list, UGraph};
pub use hot::{hot_node_fixed_point, hot_node_objective, FixedPointOptions, NodeFixedPoint};
pub use neighborhood::{
    degree_approx, incident_sums, neighborhood_action, neighborhood_optimum, random_feasible_allocation, EdgeAlloc,
    NodeDensity,
};
pub use subgraph::{path_counts, subgraph_loss, PathUse};
