//! Static allocations: per-edge routing probabilities, the vertex loads they
//! induce, and the min–max optimal allocation.
//!
//! Under a static allocation `P` each vertex sees an independent Poisson
//! stream of rate `lambda_v(P) = Σ_{e ∋ v} p_{v,e} λ_e` and behaves as an
//! M/M/1 queue, so the system is stable iff every normalized load
//! `rho_v = lambda_v(P) / mu_v` is strictly below one.

mod density;
mod optimize;

pub use density::{critical_density, DensityCertificate, ORACLE_MAX_EDGES};
pub use optimize::{max_symmetric_rate, optimize_allocation, OptimizationResult};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{EdgeId, GraphError, Hypergraph, VertexId};
use crate::lp::LpError;

/// Allowed deviation of an edge's probabilities from summing to one.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Default optimality tolerance for `z*`.
pub const DEFAULT_Z_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AllocationError {
    #[error("malformed allocation document: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("allocation references edge {0}, which is not in the hypergraph")]
    UnknownEdge(EdgeId),
    #[error("allocation has no entry for edge {0}")]
    MissingEdge(EdgeId),
    #[error("allocation lists edge {0} more than once")]
    DuplicateEdge(EdgeId),
    #[error("edge {edge}: vertex {vertex} is not a member")]
    VertexNotInEdge { edge: EdgeId, vertex: VertexId },
    #[error("edge {edge}, vertex {vertex}: probability must be finite and nonnegative, got {p}")]
    InvalidProbability {
        edge: EdgeId,
        vertex: VertexId,
        p: f64,
    },
    #[error("edge {edge}: probabilities sum to {sum}, expected 1")]
    RowSum { edge: EdgeId, sum: f64 },
    #[error("allocation does not match the hypergraph: {0}")]
    Mismatch(String),
    #[error("symmetric case only: every edge must share one arrival rate and every vertex one service rate")]
    NotSymmetric,
    #[error("oracle limit: exhaustive enumeration supports at most {max} edges, got {edges}")]
    OracleLimit { edges: usize, max: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("LP solver failed: {0}")]
    Solver(#[from] LpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Probabilities `p_{v,e}` for every edge, stored against the edge's members
/// in the same order as [`crate::hypergraph::Edge::members`].
#[derive(Debug, Clone, PartialEq)]
pub struct StaticAllocation {
    rows: Vec<Vec<(VertexId, f64)>>,
}

impl StaticAllocation {
    /// `probs[e][i]` is the probability that an edge-`e` arrival is routed to
    /// the `i`-th member of edge `e`.
    pub fn new(h: &Hypergraph, probs: Vec<Vec<f64>>) -> Result<Self, AllocationError> {
        if probs.len() != h.num_edges() {
            return Err(AllocationError::Mismatch(format!(
                "{} probability rows for {} edges",
                probs.len(),
                h.num_edges()
            )));
        }
        let mut rows = Vec::with_capacity(probs.len());
        for (edge, row) in h.edges().iter().zip(probs) {
            if row.len() != edge.members.len() {
                return Err(AllocationError::Mismatch(format!(
                    "edge {}: {} probabilities for {} members",
                    edge.id,
                    row.len(),
                    edge.members.len()
                )));
            }
            let row: Vec<(VertexId, f64)> = edge.members.iter().copied().zip(row).collect();
            check_row(edge.id, &row)?;
            rows.push(row);
        }
        Ok(StaticAllocation { rows })
    }

    /// Splits every edge evenly across its members.
    pub fn uniform(h: &Hypergraph) -> Self {
        let rows = h
            .edges()
            .iter()
            .map(|e| {
                let p = 1.0 / e.members.len() as f64;
                e.members.iter().map(|&v| (v, p)).collect()
            })
            .collect();
        StaticAllocation { rows }
    }

    pub fn from_document(
        h: &Hypergraph,
        doc: &AllocationDocument,
    ) -> Result<Self, AllocationError> {
        let mut slots: Vec<Option<&BTreeMap<VertexId, f64>>> = vec![None; h.num_edges()];
        for entry in &doc.allocations {
            let slot = slots
                .get_mut(entry.edge)
                .ok_or(AllocationError::UnknownEdge(entry.edge))?;
            if slot.is_some() {
                return Err(AllocationError::DuplicateEdge(entry.edge));
            }
            *slot = Some(&entry.p);
        }
        let mut rows = Vec::with_capacity(h.num_edges());
        for (edge, slot) in h.edges().iter().zip(slots) {
            let p = slot.ok_or(AllocationError::MissingEdge(edge.id))?;
            if let Some(&vertex) = p.keys().find(|&&v| !edge.contains(v)) {
                return Err(AllocationError::VertexNotInEdge {
                    edge: edge.id,
                    vertex,
                });
            }
            let row: Vec<(VertexId, f64)> = edge
                .members
                .iter()
                .map(|&v| (v, p.get(&v).copied().unwrap_or(0.0)))
                .collect();
            check_row(edge.id, &row)?;
            rows.push(row);
        }
        Ok(StaticAllocation { rows })
    }

    pub fn parse(h: &Hypergraph, text: &str) -> Result<Self, AllocationError> {
        let doc: AllocationDocument = serde_json::from_str(text)?;
        Self::from_document(h, &doc)
    }

    pub fn to_document(&self) -> AllocationDocument {
        AllocationDocument {
            allocations: self
                .rows
                .iter()
                .enumerate()
                .map(|(edge, row)| EdgeAllocation {
                    edge,
                    p: row.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("allocation documents always serialize")
    }

    pub fn num_edges(&self) -> usize {
        self.rows.len()
    }

    /// `(vertex, probability)` pairs of edge `e`, in member order.
    pub fn row(&self, e: EdgeId) -> &[(VertexId, f64)] {
        &self.rows[e]
    }

    /// `p_{v,e}`; zero when `v` is not a member of `e`.
    pub fn p(&self, v: VertexId, e: EdgeId) -> f64 {
        self.rows
            .get(e)
            .and_then(|row| row.iter().find(|&&(u, _)| u == v))
            .map_or(0.0, |&(_, p)| p)
    }

    /// Errors unless this allocation was built for a hypergraph with exactly
    /// the edges of `h`.
    pub fn check_compatible(&self, h: &Hypergraph) -> Result<(), AllocationError> {
        if self.rows.len() != h.num_edges() {
            return Err(AllocationError::Mismatch(format!(
                "allocation covers {} edges, hypergraph has {}",
                self.rows.len(),
                h.num_edges()
            )));
        }
        for (edge, row) in h.edges().iter().zip(&self.rows) {
            let same = row.len() == edge.members.len()
                && row.iter().zip(&edge.members).all(|(&(u, _), &v)| u == v);
            if !same {
                return Err(AllocationError::Mismatch(format!(
                    "edge {}: allocation support does not match members",
                    edge.id
                )));
            }
        }
        Ok(())
    }
}

fn check_row(edge: EdgeId, row: &[(VertexId, f64)]) -> Result<(), AllocationError> {
    let mut seen = HashSet::new();
    let mut sum = 0.0;
    for &(vertex, p) in row {
        if !seen.insert(vertex) {
            return Err(AllocationError::Mismatch(format!(
                "edge {edge}: vertex {vertex} appears twice"
            )));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(AllocationError::InvalidProbability { edge, vertex, p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(AllocationError::RowSum { edge, sum });
    }
    Ok(())
}

/// `{"allocations":[{"edge":0,"p":{"0":0.5,"1":0.5}}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDocument {
    pub allocations: Vec<EdgeAllocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeAllocation {
    pub edge: EdgeId,
    pub p: BTreeMap<VertexId, f64>,
}

/// Aggregate arrival rate and normalized load of every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
}

impl LoadProfile {
    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }
}

pub fn vertex_load(h: &Hypergraph, p: &StaticAllocation) -> Result<LoadProfile, AllocationError> {
    p.check_compatible(h)?;
    let mut lambda = vec![0.0; h.num_vertices()];
    for edge in h.edges() {
        for &(v, pv) in p.row(edge.id) {
            lambda[v] += pv * edge.lambda;
        }
    }
    let rho = lambda.iter().zip(h.mus()).map(|(l, mu)| l / mu).collect();
    Ok(LoadProfile { lambda, rho })
}

/// Stable iff `rho_v < 1` for every vertex; `rho_v == 1` counts as unstable.
pub fn is_stable_static(
    h: &Hypergraph,
    p: &StaticAllocation,
) -> Result<(bool, LoadProfile), AllocationError> {
    let load = vertex_load(h, p)?;
    let stable = load.rho.iter().all(|&r| r < 1.0);
    Ok((stable, load))
}

/// True iff all normalized loads agree within `tol`.
pub fn is_balanced(
    h: &Hypergraph,
    p: &StaticAllocation,
    tol: f64,
) -> Result<bool, AllocationError> {
    let load = vertex_load(h, p)?;
    let lo = load.rho.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = load.max_rho();
    Ok(hi - lo <= tol)
}
