//! Standard topologies and model reductions.

use itertools::Itertools;

use super::{GraphError, Hypergraph, VertexId};

fn invalid(msg: String) -> GraphError {
    GraphError::InvalidParameter(msg)
}

/// Cycle on `n` vertices: edges `{i, (i + 1) mod n}`.
pub fn gen_cycle(n: usize, lambda: f64, mu: f64) -> Result<Hypergraph, GraphError> {
    if n < 3 {
        return Err(invalid(format!("cycle needs n >= 3, got {n}")));
    }
    let edges = (0..n).map(|i| (vec![i, (i + 1) % n], lambda)).collect();
    Hypergraph::new(vec![mu; n], edges)
}

/// All `n(n-1)/2` vertex pairs.
pub fn gen_complete_graph(n: usize, lambda: f64, mu: f64) -> Result<Hypergraph, GraphError> {
    if n < 2 {
        return Err(invalid(format!("complete graph needs n >= 2, got {n}")));
    }
    gen_complete_d_hypergraph(n, 2, lambda, mu)
}

/// Every `d`-subset of `n` vertices is an edge, in lexicographic order.
///
/// JSQ on this hypergraph is the power-of-`d` scheme: each arrival samples a
/// uniformly random `d`-subset (the superposed stream) and joins the shortest.
pub fn gen_complete_d_hypergraph(
    n: usize,
    d: usize,
    lambda: f64,
    mu: f64,
) -> Result<Hypergraph, GraphError> {
    if d == 0 || d > n {
        return Err(invalid(format!("need 1 <= d <= n, got d = {d}, n = {n}")));
    }
    let edges = (0..n).combinations(d).map(|m| (m, lambda)).collect();
    Hypergraph::new(vec![mu; n], edges)
}

/// A `k`-clique on vertices `0..k` plus one pendant leaf `k + i` attached to
/// each clique vertex `i`. Clique edges come first, then the `k` leaf edges.
pub fn gen_clique_with_leaves(k: usize, lambda: f64, mu: f64) -> Result<Hypergraph, GraphError> {
    if k <= 2 {
        return Err(invalid(format!("clique with leaves needs k > 2, got {k}")));
    }
    let mut edges: Vec<(Vec<VertexId>, f64)> =
        (0..k).combinations(2).map(|m| (m, lambda)).collect();
    edges.extend((0..k).map(|i| (vec![i, k + i], lambda)));
    Hypergraph::new(vec![mu; 2 * k], edges)
}

/// Hypergraph form of the neighborhood model: node `i` of an undirected graph
/// becomes hyperedge `{i} ∪ N(i)` carrying `lambdas[i]`, served by vertices
/// with rates `mus`.
pub fn from_neighborhood_graph(
    adjacency: &[Vec<VertexId>],
    lambdas: &[f64],
    mus: &[f64],
) -> Result<Hypergraph, GraphError> {
    let n = adjacency.len();
    if lambdas.len() != n || mus.len() != n {
        return Err(invalid(format!(
            "adjacency has {n} nodes but {} arrival rates and {} service rates were given",
            lambdas.len(),
            mus.len()
        )));
    }
    for (i, nbrs) in adjacency.iter().enumerate() {
        for (pos, &j) in nbrs.iter().enumerate() {
            if j >= n {
                return Err(invalid(format!("node {i}: neighbor {j} out of range")));
            }
            if j == i {
                return Err(invalid(format!("node {i}: self-loop")));
            }
            if nbrs[..pos].contains(&j) {
                return Err(invalid(format!("node {i}: neighbor {j} listed twice")));
            }
            if !adjacency[j].contains(&i) {
                return Err(invalid(format!(
                    "asymmetric adjacency: {j} is a neighbor of {i} but not vice versa"
                )));
            }
        }
    }
    let edges = adjacency
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut members = nbrs.clone();
            members.push(i);
            (members, lambdas[i])
        })
        .collect();
    Hypergraph::new(mus.to_vec(), edges)
}
