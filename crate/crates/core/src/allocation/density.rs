//! Exhaustive densest-edge-subset oracle.
//!
//! For any nonempty edge subset `F` with vertex cover `V(F)`, all of `F`'s
//! traffic must be absorbed by `V(F)`, so every allocation has
//! `max_v rho_v >= Σ_{e∈F} λ_e / Σ_{v∈V(F)} μ_v`. The maximum of this
//! density over all `F` equals the optimal min–max load (LP duality), which
//! makes the enumeration an independent check on the LP solver.

use serde::{Deserialize, Serialize};

use super::AllocationError;
use crate::hypergraph::{EdgeId, Hypergraph};

pub const ORACLE_MAX_EDGES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCertificate {
    pub z: f64,
    /// Maximizing edge subset, ascending ids.
    pub edges: Vec<EdgeId>,
}

/// Density `Σ_{e∈F} λ_e / Σ_{v∈V(F)} μ_v` of an edge subset.
pub fn subset_density(h: &Hypergraph, edges: &[EdgeId]) -> f64 {
    let mut covered = vec![false; h.num_vertices()];
    let mut arrivals = 0.0;
    for &e in edges {
        let edge = h.edge(e);
        arrivals += edge.lambda;
        for &v in &edge.members {
            covered[v] = true;
        }
    }
    let service: f64 = covered
        .iter()
        .zip(h.mus())
        .filter(|(c, _)| **c)
        .map(|(_, mu)| mu)
        .sum();
    arrivals / service
}

/// Maximum subset density over all `2^|E| - 1` nonempty edge subsets, with
/// the lexicographically smallest maximizer.
pub fn critical_density(h: &Hypergraph) -> Result<DensityCertificate, AllocationError> {
    let m = h.num_edges();
    if m > ORACLE_MAX_EDGES {
        return Err(AllocationError::OracleLimit {
            edges: m,
            max: ORACLE_MAX_EDGES,
        });
    }
    let mut best = DensityCertificate {
        z: f64::NEG_INFINITY,
        edges: Vec::new(),
    };
    let mut subset = Vec::with_capacity(m);
    for mask in 1u32..(1u32 << m) {
        subset.clear();
        subset.extend((0..m).filter(|&e| mask & (1 << e) != 0));
        let z = subset_density(h, &subset);
        let replace = if best.edges.is_empty() {
            true
        } else {
            let slack = 1e-12 * best.z.abs().max(1.0);
            z > best.z + slack || (z >= best.z - slack && subset < best.edges)
        };
        if replace {
            best.z = z;
            best.edges.clone_from(&subset);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{gen_clique_with_leaves, gen_complete_graph, gen_cycle};

    #[test]
    fn clique_with_leaves_densest_is_the_clique() {
        let h = gen_clique_with_leaves(4, 1.0, 1.0).unwrap();
        let c = critical_density(&h).unwrap();
        assert!((c.z - 1.5).abs() < 1e-12);
        assert_eq!(c.edges, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_edge_density() {
        let h = Hypergraph::new(vec![1.0, 3.0], vec![(vec![0, 1], 2.0)]).unwrap();
        let c = critical_density(&h).unwrap();
        assert_eq!(c.z, 0.5);
        assert_eq!(c.edges, vec![0]);
    }

    #[test]
    fn complete_graph_density() {
        let h = gen_complete_graph(4, 1.0, 1.0).unwrap();
        let c = critical_density(&h).unwrap();
        assert!((c.z - 1.5).abs() < 1e-12);
        assert_eq!(c.edges, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn ties_prefer_lexicographically_smallest() {
        // Two disjoint identical edges: {0}, {1} and {0,1} all have density 1.
        let h = Hypergraph::new(vec![1.0, 1.0], vec![(vec![0], 1.0), (vec![1], 1.0)]).unwrap();
        let c = critical_density(&h).unwrap();
        assert_eq!(c.z, 1.0);
        assert_eq!(c.edges, vec![0]);
    }

    #[test]
    fn cycle_density_is_one() {
        let h = gen_cycle(5, 1.0, 1.0).unwrap();
        let c = critical_density(&h).unwrap();
        assert!((c.z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_inputs() {
        let h = gen_complete_graph(7, 1.0, 1.0).unwrap();
        assert!(matches!(
            critical_density(&h),
            Err(AllocationError::OracleLimit { edges: 21, max: 20 })
        ));
    }
}
