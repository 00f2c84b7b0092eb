//! Rated hypergraphs of queues.
//!
//! Every vertex hosts a single exponential server with rate `mu`, every
//! hyperedge carries an independent Poisson stream of customers with rate
//! `lambda` that may be served by any member vertex.
//!
//! Vertex and edge ids are dense indices: vertex `v` is stored at position
//! `v`, edge `e` at position `e`. Edge members are kept sorted ascending.

mod generators;
mod io;

pub use generators::{
    from_neighborhood_graph, gen_clique_with_leaves, gen_complete_d_hypergraph, gen_complete_graph,
    gen_cycle,
};
pub use io::{parse, serialize, validate, EdgeRecord, HypergraphDocument, VertexRecord};

use std::fmt;

use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed hypergraph document: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid hypergraph: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single broken invariant, with the id of the offending vertex or edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoVertices,
    NoEdges,
    DuplicateVertexId {
        vertex: VertexId,
    },
    /// Vertex ids must be dense in `[0, |V|)`.
    VertexIdOutOfRange {
        vertex: VertexId,
        num_vertices: usize,
    },
    InvalidMu {
        vertex: VertexId,
        mu: f64,
    },
    DuplicateEdgeId {
        edge: EdgeId,
    },
    EdgeIdOutOfRange {
        edge: EdgeId,
        num_edges: usize,
    },
    EmptyEdge {
        edge: EdgeId,
    },
    UnknownVertex {
        edge: EdgeId,
        vertex: VertexId,
    },
    DuplicateMember {
        edge: EdgeId,
        vertex: VertexId,
    },
    InvalidLambda {
        edge: EdgeId,
        lambda: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoVertices => write!(f, "hypergraph has no vertices"),
            Violation::NoEdges => write!(f, "hypergraph has no edges"),
            Violation::DuplicateVertexId { vertex } => write!(f, "vertex {vertex}: duplicate id"),
            Violation::VertexIdOutOfRange {
                vertex,
                num_vertices,
            } => write!(
                f,
                "vertex {vertex}: id out of range, ids must be dense in [0, {num_vertices})"
            ),
            Violation::InvalidMu { vertex, mu } => write!(
                f,
                "vertex {vertex}: service rate mu must be finite and positive, got {mu}"
            ),
            Violation::DuplicateEdgeId { edge } => write!(f, "edge {edge}: duplicate id"),
            Violation::EdgeIdOutOfRange { edge, num_edges } => write!(
                f,
                "edge {edge}: id out of range, ids must be dense in [0, {num_edges})"
            ),
            Violation::EmptyEdge { edge } => write!(f, "edge {edge}: empty edge"),
            Violation::UnknownVertex { edge, vertex } => {
                write!(f, "edge {edge}: unknown vertex {vertex}")
            }
            Violation::DuplicateMember { edge, vertex } => {
                write!(f, "edge {edge}: duplicate member vertex {vertex}")
            }
            Violation::InvalidLambda { edge, lambda } => write!(
                f,
                "edge {edge}: arrival rate lambda must be finite and nonnegative, got {lambda}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub members: Vec<VertexId>,
    pub lambda: f64,
}

impl Edge {
    pub fn contains(&self, v: VertexId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    /// Position of `v` within `members`, if present.
    pub fn position(&self, v: VertexId) -> Option<usize> {
        self.members.binary_search(&v).ok()
    }
}

/// A validated, immutable rated hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    mu: Vec<f64>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<EdgeId>>,
}

impl Hypergraph {
    /// Builds a hypergraph from per-vertex service rates and `(members, lambda)`
    /// pairs. Vertex `i` gets `mu[i]`, edge `j` is the `j`-th pair.
    pub fn new(mu: Vec<f64>, edges: Vec<(Vec<VertexId>, f64)>) -> Result<Self, GraphError> {
        let doc = HypergraphDocument {
            vertices: mu
                .into_iter()
                .enumerate()
                .map(|(id, mu)| VertexRecord { id, mu })
                .collect(),
            edges: edges
                .into_iter()
                .enumerate()
                .map(|(id, (members, lambda))| EdgeRecord {
                    id,
                    members,
                    lambda,
                })
                .collect(),
        };
        Self::from_document(doc)
    }

    pub fn from_document(doc: HypergraphDocument) -> Result<Self, GraphError> {
        let violations = validate(&doc);
        if !violations.is_empty() {
            return Err(GraphError::Invalid(violations));
        }
        let mut vertices = doc.vertices;
        vertices.sort_by_key(|v| v.id);
        let mut records = doc.edges;
        records.sort_by_key(|e| e.id);

        let mu: Vec<f64> = vertices.into_iter().map(|v| v.mu).collect();
        let mut incidence = vec![Vec::new(); mu.len()];
        let edges: Vec<Edge> = records
            .into_iter()
            .map(|r| {
                let mut members = r.members;
                members.sort_unstable();
                for &v in &members {
                    incidence[v].push(r.id);
                }
                Edge {
                    id: r.id,
                    members,
                    lambda: r.lambda,
                }
            })
            .collect();
        Ok(Hypergraph {
            mu,
            edges,
            incidence,
        })
    }

    pub fn to_document(&self) -> HypergraphDocument {
        HypergraphDocument {
            vertices: self
                .mu
                .iter()
                .enumerate()
                .map(|(id, &mu)| VertexRecord { id, mu })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id,
                    members: e.members.clone(),
                    lambda: e.lambda,
                })
                .collect(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.mu.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn mu(&self, v: VertexId) -> f64 {
        self.mu[v]
    }

    pub fn mus(&self) -> &[f64] {
        &self.mu
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    /// Edges containing `v`, ascending by id. Panics if `v` is out of range.
    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incidence[v]
    }

    /// The set E(v) of edges containing `v`.
    pub fn incident_edges(&self, v: VertexId) -> Result<&[EdgeId], GraphError> {
        self.incidence
            .get(v)
            .map(Vec::as_slice)
            .ok_or(GraphError::UnknownVertex(v))
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v].len()
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.edges.iter().map(|e| e.lambda).sum()
    }

    pub fn total_service_rate(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Returns `(lambda, mu)` when every edge shares one arrival rate and every
    /// vertex shares one service rate.
    pub fn symmetric_rates(&self) -> Option<(f64, f64)> {
        let lambda = self.edges[0].lambda;
        let mu = self.mu[0];
        let same_lambda = self.edges.iter().all(|e| e.lambda == lambda);
        let same_mu = self.mu.iter().all(|&m| m == mu);
        (same_lambda && same_mu).then_some((lambda, mu))
    }

    /// Same topology and service rates, every edge carrying `lambda`.
    pub fn with_uniform_lambda(&self, lambda: f64) -> Result<Self, GraphError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(GraphError::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        let mut h = self.clone();
        for e in &mut h.edges {
            e.lambda = lambda;
        }
        Ok(h)
    }

    /// Multiplies every arrival rate by `lambda_factor` and every service rate
    /// by `mu_factor`.
    pub fn with_scaled_rates(
        &self,
        lambda_factor: f64,
        mu_factor: f64,
    ) -> Result<Self, GraphError> {
        let (mu, edges) = self.parts();
        Hypergraph::new(
            mu.iter().map(|m| m * mu_factor).collect(),
            edges
                .into_iter()
                .map(|(members, lambda)| (members, lambda * lambda_factor))
                .collect(),
        )
    }

    /// Adds one edge and returns the extended hypergraph; the new edge gets
    /// id `num_edges()`.
    pub fn with_edge(&self, members: Vec<VertexId>, lambda: f64) -> Result<Self, GraphError> {
        let (mu, mut edges) = self.parts();
        edges.push((members, lambda));
        Hypergraph::new(mu, edges)
    }

    fn parts(&self) -> (Vec<f64>, Vec<(Vec<VertexId>, f64)>) {
        (
            self.mu.clone(),
            self.edges
                .iter()
                .map(|e| (e.members.clone(), e.lambda))
                .collect(),
        )
    }
}
