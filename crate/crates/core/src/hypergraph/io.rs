use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{EdgeId, GraphError, Hypergraph, VertexId, Violation};

/// On-disk form of a hypergraph:
/// `{"vertices":[{"id":0,"mu":1.0}],"edges":[{"id":0,"members":[0],"lambda":0.5}]}`.
///
/// May hold an invalid graph; see [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypergraphDocument {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: VertexId,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub members: Vec<VertexId>,
    pub lambda: f64,
}

/// Lists every invariant violation in `doc`. Empty iff the document describes
/// a valid hypergraph.
pub fn validate(doc: &HypergraphDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.vertices.len();
    let m = doc.edges.len();
    if n == 0 {
        out.push(Violation::NoVertices);
    }
    if m == 0 {
        out.push(Violation::NoEdges);
    }

    let mut seen = HashSet::new();
    for v in &doc.vertices {
        if !seen.insert(v.id) {
            out.push(Violation::DuplicateVertexId { vertex: v.id });
        } else if v.id >= n {
            out.push(Violation::VertexIdOutOfRange {
                vertex: v.id,
                num_vertices: n,
            });
        }
        if !(v.mu.is_finite() && v.mu > 0.0) {
            out.push(Violation::InvalidMu {
                vertex: v.id,
                mu: v.mu,
            });
        }
    }
    let known = seen;

    let mut seen = HashSet::new();
    for e in &doc.edges {
        if !seen.insert(e.id) {
            out.push(Violation::DuplicateEdgeId { edge: e.id });
        } else if e.id >= m {
            out.push(Violation::EdgeIdOutOfRange {
                edge: e.id,
                num_edges: m,
            });
        }
        if e.members.is_empty() {
            out.push(Violation::EmptyEdge { edge: e.id });
        }
        let mut members = HashSet::new();
        for &v in &e.members {
            if !members.insert(v) {
                out.push(Violation::DuplicateMember {
                    edge: e.id,
                    vertex: v,
                });
            } else if !known.contains(&v) {
                out.push(Violation::UnknownVertex {
                    edge: e.id,
                    vertex: v,
                });
            }
        }
        if !(e.lambda.is_finite() && e.lambda >= 0.0) {
            out.push(Violation::InvalidLambda {
                edge: e.id,
                lambda: e.lambda,
            });
        }
    }
    out
}

/// Parses and validates a hypergraph document.
pub fn parse(text: &str) -> Result<Hypergraph, GraphError> {
    let doc: HypergraphDocument = serde_json::from_str(text)?;
    Hypergraph::from_document(doc)
}

/// Compact document with vertices and edges sorted by id.
pub fn serialize(h: &Hypergraph) -> String {
    serde_json::to_string(&h.to_document()).expect("hypergraph documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{
        gen_clique_with_leaves, gen_complete_d_hypergraph, gen_complete_graph, gen_cycle,
    };
    use proptest::prelude::*;

    fn doc(text: &str) -> HypergraphDocument {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn minimal_graph_is_valid() {
        let d = doc(
            r#"{"vertices":[{"id":0,"mu":1.0},{"id":1,"mu":1.0}],"edges":[{"id":0,"members":[0,1],"lambda":1.0}]}"#,
        );
        assert!(validate(&d).is_empty());
    }

    #[test]
    fn empty_edge_is_one_violation() {
        let d =
            doc(r#"{"vertices":[{"id":0,"mu":1.0}],"edges":[{"id":0,"members":[],"lambda":1.0}]}"#);
        let v = validate(&d);
        assert_eq!(v, vec![Violation::EmptyEdge { edge: 0 }]);
        assert!(v[0].to_string().contains("empty edge"));
    }

    #[test]
    fn unknown_vertex_is_one_violation() {
        let d = doc(
            r#"{"vertices":[{"id":0,"mu":1.0},{"id":1,"mu":1.0}],"edges":[{"id":0,"members":[0,7],"lambda":1.0}]}"#,
        );
        let v = validate(&d);
        assert_eq!(v, vec![Violation::UnknownVertex { edge: 0, vertex: 7 }]);
        assert!(v[0].to_string().contains("unknown vertex"));
    }

    #[test]
    fn negative_mu_names_the_vertex() {
        let text = r#"{"vertices":[{"id":0,"mu":1.0},{"id":1,"mu":-2.0}],"edges":[{"id":0,"members":[0,1],"lambda":1.0}]}"#;
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("vertex 1"), "{err}");
    }

    #[test]
    fn duplicate_member_is_rejected() {
        let text = r#"{"vertices":[{"id":0,"mu":1.0},{"id":1,"mu":1.0}],"edges":[{"id":0,"members":[0,1,0],"lambda":1.0}]}"#;
        match parse(text).unwrap_err() {
            GraphError::Invalid(v) => {
                assert_eq!(v, vec![Violation::DuplicateMember { edge: 0, vertex: 0 }])
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"vertices":[{"id":0,"mu":1.0,"name":"a"}],"edges":[{"id":0,"members":[0],"lambda":1.0}]}"#;
        assert!(matches!(parse(text), Err(GraphError::Syntax(_))));
        let text = r#"{"vertices":[{"id":0,"mu":1.0}],"edges":[{"id":0,"members":[0],"lambda":1.0}],"extra":1}"#;
        assert!(matches!(parse(text), Err(GraphError::Syntax(_))));
    }

    #[test]
    fn syntax_error_reports_location() {
        let err = parse("{\"vertices\": [\n{\"id\":0,,}]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn sparse_and_duplicate_ids_are_violations() {
        let d = doc(
            r#"{"vertices":[{"id":0,"mu":1.0},{"id":5,"mu":1.0}],"edges":[{"id":0,"members":[0],"lambda":1.0},{"id":0,"members":[5],"lambda":1.0}]}"#,
        );
        let v = validate(&d);
        assert!(v.contains(&Violation::VertexIdOutOfRange {
            vertex: 5,
            num_vertices: 2
        }));
        assert!(v.contains(&Violation::DuplicateEdgeId { edge: 0 }));
    }

    #[test]
    fn empty_graph_is_invalid() {
        let d = doc(r#"{"vertices":[],"edges":[]}"#);
        assert_eq!(
            validate(&d),
            vec![Violation::NoVertices, Violation::NoEdges]
        );
    }

    #[test]
    fn out_of_order_ids_are_sorted() {
        let text = r#"{"vertices":[{"id":1,"mu":2.0},{"id":0,"mu":1.0}],"edges":[{"id":1,"members":[1],"lambda":0.5},{"id":0,"members":[1,0],"lambda":1.0}]}"#;
        let h = parse(text).unwrap();
        assert_eq!(h.mus(), &[1.0, 2.0]);
        assert_eq!(h.edge(0).members, vec![0, 1]);
        assert_eq!(h.edge(1).lambda, 0.5);
        assert_eq!(
            serialize(&h),
            r#"{"vertices":[{"id":0,"mu":1.0},{"id":1,"mu":2.0}],"edges":[{"id":0,"members":[0,1],"lambda":1.0},{"id":1,"members":[1],"lambda":0.5}]}"#
        );
    }

    #[test]
    fn cycle_round_trips() {
        let h = gen_cycle(3, 1.0, 1.0).unwrap();
        assert_eq!(parse(&serialize(&h)).unwrap(), h);
    }

    fn arb_hypergraph() -> impl Strategy<Value = Hypergraph> {
        (1usize..7).prop_flat_map(|n| {
            (
                prop::collection::vec(1e-3f64..1e3, n),
                prop::collection::vec(
                    (prop::collection::btree_set(0..n, 1..=n), 0.0f64..1e3),
                    1..8,
                ),
            )
                .prop_map(|(mu, edges)| {
                    let edges = edges
                        .into_iter()
                        .map(|(m, l)| (m.into_iter().collect(), l))
                        .collect();
                    Hypergraph::new(mu, edges).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_identity(h in arb_hypergraph()) {
            let text = serialize(&h);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &h);
            prop_assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn generated_families_round_trip() {
        let graphs = [
            gen_cycle(7, 0.3, 1.5).unwrap(),
            gen_complete_graph(5, 1.0, 1.0).unwrap(),
            gen_complete_d_hypergraph(6, 3, 0.1, 2.0).unwrap(),
            gen_clique_with_leaves(5, 0.7, 1.0).unwrap(),
        ];
        for h in graphs {
            assert_eq!(parse(&serialize(&h)).unwrap(), h);
        }
    }
}
