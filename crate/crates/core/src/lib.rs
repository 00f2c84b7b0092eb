//! Join-the-shortest-queue load balancing on hypergraphs of queues.
//!
//! Customers arrive on the hyperedges of a hypergraph as independent Poisson
//! streams and are served by exponential servers sitting on the vertices. An
//! arrival on edge `e` may join any member of `e`: either at random with
//! fixed probabilities (a static allocation) or at the currently shortest
//! member queue (JSQ).
//!
//! - [`hypergraph`]: the rated hypergraph, its file format and generators.
//! - [`allocation`]: static allocations, vertex loads and the min–max LP.
//! - [`lyapunov`]: quadratic Lyapunov drift of the JSQ chain and its bounds.
//! - [`simulator`]: event-driven CTMC simulation and empirical stability.
//! - [`lp`]: the dense simplex backing the allocation optimizer.

pub mod allocation;
pub mod hypergraph;
pub mod lp;
pub mod lyapunov;
pub mod simulator;

pub use allocation::{
    critical_density, is_balanced, is_stable_static, max_symmetric_rate, optimize_allocation,
    vertex_load, AllocationError, LoadProfile, OptimizationResult, StaticAllocation,
};
pub use hypergraph::{EdgeId, GraphError, Hypergraph, VertexId};
pub use lyapunov::{
    drift_upper_bound, epsilon_gap, exact_drift, lyapunov_value, negative_drift_threshold,
    DriftError, DriftReport, QueueState,
};
