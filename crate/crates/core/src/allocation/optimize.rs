//! Min–max optimal static allocation.
//!
//! ```text
//! minimize    z
//! subject to  (1/μ_v) Σ_{e∋v} λ_e p_{v,e} <= z    for every vertex v
//!             Σ_{v∈e} p_{v,e} = 1                 for every edge e
//!             p >= 0
//! ```
//!
//! Solved with the crate's simplex. A stable static allocation exists iff
//! the optimum `z*` is below one.

use serde::Serialize;

use super::density::subset_density;
use super::{vertex_load, AllocationDocument, AllocationError, StaticAllocation};
use crate::hypergraph::{EdgeId, Hypergraph};
use crate::lp::{self, LinearProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub allocation: StaticAllocation,
    /// Largest normalized load of `allocation`, within `tol` of the LP optimum.
    pub z_star: f64,
    /// Critical per-edge rate `μ / z*(λ = 1)`; only for symmetric hypergraphs.
    pub lambda_star: Option<f64>,
    /// An edge subset whose density equals `z_star` within `tol`, proving
    /// that no allocation does better.
    pub certificate: Option<Vec<EdgeId>>,
}

#[derive(Serialize)]
struct ResultDocument<'a> {
    z_star: f64,
    lambda_star: Option<f64>,
    allocation: AllocationDocument,
    certificate: Option<&'a [EdgeId]>,
}

impl OptimizationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ResultDocument {
            z_star: self.z_star,
            lambda_star: self.lambda_star,
            allocation: self.allocation.to_document(),
            certificate: self.certificate.as_deref(),
        })
        .expect("optimization results always serialize")
    }
}

/// Builds the min–max LP. Columns: one `p_{v,e}` per (edge, member) in edge
/// order, then `z`, then one slack per vertex.
fn build_lp(h: &Hypergraph) -> (LinearProgram, Vec<usize>) {
    let n = h.num_vertices();
    let m = h.num_edges();
    let mut offsets = Vec::with_capacity(m);
    let mut num_p = 0;
    for e in h.edges() {
        offsets.push(num_p);
        num_p += e.members.len();
    }
    let z_col = num_p;
    let cols = num_p + 1 + n;

    let mut a = vec![vec![0.0; cols]; n + m];
    let mut b = vec![0.0; n + m];
    for (e, edge) in h.edges().iter().enumerate() {
        for (i, &v) in edge.members.iter().enumerate() {
            a[v][offsets[e] + i] = edge.lambda / h.mu(v);
            a[n + e][offsets[e] + i] = 1.0;
        }
        b[n + e] = 1.0;
    }
    for v in 0..n {
        a[v][z_col] = -1.0;
        a[v][z_col + 1 + v] = 1.0;
    }
    let mut c = vec![0.0; cols];
    c[z_col] = 1.0;
    (LinearProgram { a, b, c }, offsets)
}

pub fn optimize_allocation(
    h: &Hypergraph,
    tol: f64,
) -> Result<OptimizationResult, AllocationError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(AllocationError::InvalidTolerance(tol));
    }
    let (allocation, z_star) = solve_min_max(h, tol)?;
    let lambda_star = match h.symmetric_rates() {
        Some(_) => Some(max_symmetric_rate(h)?),
        None => None,
    };
    let certificate = tight_subset(h, &allocation, z_star, tol);
    Ok(OptimizationResult {
        allocation,
        z_star,
        lambda_star,
        certificate,
    })
}

fn solve_min_max(h: &Hypergraph, tol: f64) -> Result<(StaticAllocation, f64), AllocationError> {
    let (program, offsets) = build_lp(h);
    let solution = lp::solve(&program)?;

    // Clean solver round-off so every row is an exact probability vector.
    let probs: Vec<Vec<f64>> = h
        .edges()
        .iter()
        .zip(&offsets)
        .map(|(edge, &off)| {
            let mut row: Vec<f64> = solution.x[off..off + edge.members.len()]
                .iter()
                .map(|&p| p.max(0.0))
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= sum);
            row
        })
        .collect();
    let allocation = StaticAllocation::new(h, probs)?;
    let z_star = vertex_load(h, &allocation)?.max_rho();
    if (z_star - solution.objective).abs() > tol {
        return Err(AllocationError::Mismatch(format!(
            "LP objective {} and achieved load {z_star} differ by more than {tol}",
            solution.objective
        )));
    }
    Ok((allocation, z_star))
}

/// Supremum per-edge arrival rate for which a stable static allocation
/// exists, `μ / z*` with `z*` taken at unit arrival rates.
pub fn max_symmetric_rate(h: &Hypergraph) -> Result<f64, AllocationError> {
    h.symmetric_rates().ok_or(AllocationError::NotSymmetric)?;
    let unit = h.with_uniform_lambda(1.0)?;
    let (_, z) = solve_min_max(&unit, super::DEFAULT_Z_TOL)?;
    Ok(1.0 / z)
}

/// Extracts a densest edge subset from an optimal allocation.
///
/// Starting from the vertices at maximal load, drop every vertex from which
/// load can be shifted (through edges with positive probability on it) to a
/// vertex below the maximum. Load on the surviving set `S` comes only from
/// edges contained in `S`, so `density(S) = z*`.
fn tight_subset(
    h: &Hypergraph,
    p: &StaticAllocation,
    z_star: f64,
    tol: f64,
) -> Option<Vec<EdgeId>> {
    if z_star <= 0.0 {
        return None;
    }
    let rho = vertex_load(h, p).ok()?.rho;
    let n = h.num_vertices();
    let tight: Vec<bool> = rho.iter().map(|&r| r >= z_star - tol).collect();

    // Reverse search: a vertex escapes if it can shift load to an escaped one.
    let mut escapes: Vec<bool> = tight.iter().map(|&t| !t).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&v| escapes[v]).collect();
    while let Some(u) = stack.pop() {
        for &e in h.incident(u) {
            for &(v, pv) in p.row(e) {
                if !escapes[v] && pv > tol {
                    escapes[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    let edges: Vec<EdgeId> = h
        .edges()
        .iter()
        .filter(|e| e.members.iter().all(|&v| !escapes[v]))
        .map(|e| e.id)
        .collect();
    if edges.is_empty() {
        return None;
    }
    let density = subset_density(h, &edges);
    ((density - z_star).abs() <= tol).then_some(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{critical_density, is_balanced, DEFAULT_Z_TOL};
    use crate::hypergraph::{
        gen_clique_with_leaves, gen_complete_d_hypergraph, gen_complete_graph, gen_cycle,
    };
    use proptest::prelude::*;

    const TOL: f64 = DEFAULT_Z_TOL;

    #[test]
    fn clique_with_leaves_optimum() {
        let h = gen_clique_with_leaves(4, 1.0, 1.0).unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        assert!((r.z_star - 1.5).abs() <= TOL);
        assert!((r.lambda_star.unwrap() - 2.0 / 3.0).abs() <= TOL);
        assert_eq!(r.certificate, Some(vec![0, 1, 2, 3, 4, 5]));
    }

    #[test]
    fn single_edge_optimum() {
        let h = Hypergraph::new(vec![1.0, 1.0], vec![(vec![0, 1], 1.0)]).unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        assert!((r.z_star - 0.5).abs() <= TOL);
        assert!((r.allocation.p(0, 0) - 0.5).abs() <= TOL);
        assert!((r.allocation.p(1, 0) - 0.5).abs() <= TOL);
    }

    #[test]
    fn max_symmetric_rates() {
        let h = gen_clique_with_leaves(4, 3.0, 1.0).unwrap();
        let l = max_symmetric_rate(&h).unwrap();
        assert!((l - 2.0 / 3.0).abs() <= TOL);
        let total = l * h.num_edges() as f64;
        assert!((total - 20.0 / 3.0).abs() <= 1e-5);

        for n in 3..9 {
            let h = gen_cycle(n, 0.2, 1.0).unwrap();
            assert!((max_symmetric_rate(&h).unwrap() - 1.0).abs() <= TOL);
        }
        // mu scales the critical rate.
        let h = gen_cycle(5, 1.0, 2.5).unwrap();
        assert!((max_symmetric_rate(&h).unwrap() - 2.5).abs() <= TOL);
    }

    #[test]
    fn max_symmetric_rate_rejects_asymmetric() {
        let h = Hypergraph::new(vec![1.0, 2.0], vec![(vec![0, 1], 1.0)]).unwrap();
        assert!(matches!(
            max_symmetric_rate(&h),
            Err(AllocationError::NotSymmetric)
        ));
        let r = optimize_allocation(&h, TOL).unwrap();
        assert_eq!(r.lambda_star, None);
    }

    #[test]
    fn zero_rate_edges_and_singletons() {
        let h = Hypergraph::new(
            vec![1.0, 1.0, 1.0],
            vec![(vec![0], 0.4), (vec![0, 1, 2], 0.0), (vec![1, 2], 0.6)],
        )
        .unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        assert_eq!(r.allocation.p(0, 0), 1.0);
        assert!((r.z_star - 0.4).abs() <= TOL);
        let oracle = critical_density(&h).unwrap();
        assert!((r.z_star - oracle.z).abs() <= TOL);
    }

    #[test]
    fn all_zero_rates() {
        let h = gen_cycle(4, 0.0, 1.0).unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        assert_eq!(r.z_star, 0.0);
        assert_eq!(r.certificate, None);
        assert!((r.lambda_star.unwrap() - 1.0).abs() <= TOL);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let h = gen_cycle(4, 1.0, 1.0).unwrap();
        assert!(optimize_allocation(&h, 0.0).is_err());
        assert!(optimize_allocation(&h, f64::NAN).is_err());
    }

    #[test]
    fn balanced_extremes_pool_resources() {
        for n in 3..9 {
            for h in [
                gen_cycle(n, 1.0, 1.0).unwrap(),
                gen_complete_graph(n, 1.0, 1.0).unwrap(),
            ] {
                let r = optimize_allocation(&h, TOL).unwrap();
                assert!(is_balanced(&h, &r.allocation, TOL).unwrap());
                let pooled = h.num_edges() as f64 / h.num_vertices() as f64;
                assert!((r.z_star - pooled).abs() <= TOL);
            }
        }
    }

    #[test]
    fn complete_d_hypergraph_pools() {
        let h = gen_complete_d_hypergraph(6, 3, 1.0, 2.0).unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        assert!((r.z_star - 20.0 / 12.0).abs() <= TOL);
    }

    #[test]
    fn deterministic() {
        let h = gen_clique_with_leaves(5, 0.7, 1.3).unwrap();
        let a = optimize_allocation(&h, TOL).unwrap();
        let b = optimize_allocation(&h, TOL).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn adding_an_edge_never_helps() {
        for k in 4..8 {
            let clique = gen_complete_graph(k, 1.0, 1.0).unwrap();
            let full = gen_clique_with_leaves(k, 1.0, 1.0).unwrap();
            // Same vertex set: the clique plus isolated leaf vertices.
            let padded = Hypergraph::new(
                vec![1.0; 2 * k],
                clique
                    .edges()
                    .iter()
                    .map(|e| (e.members.clone(), e.lambda))
                    .collect(),
            )
            .unwrap();
            let z_clique = optimize_allocation(&padded, TOL).unwrap().z_star;
            let z_full = optimize_allocation(&full, TOL).unwrap().z_star;
            assert!(z_full >= z_clique - TOL);
            // Isolated leaf vertices cannot help the clique.
            let z_bare = optimize_allocation(&clique, TOL).unwrap().z_star;
            assert!((z_clique - z_bare).abs() <= TOL);
        }
    }

    #[test]
    fn result_document_shape() {
        let h = Hypergraph::new(vec![1.0, 1.0], vec![(vec![0, 1], 1.0)]).unwrap();
        let r = optimize_allocation(&h, TOL).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["z_star"].is_f64());
        assert!(v["lambda_star"].is_f64());
        assert_eq!(v["certificate"], serde_json::json!([0]));
        let alloc: AllocationDocument = serde_json::from_value(v["allocation"].clone()).unwrap();
        assert_eq!(
            StaticAllocation::from_document(&h, &alloc).unwrap(),
            r.allocation
        );
    }

    pub(crate) fn arb_small_hypergraph() -> impl Strategy<Value = Hypergraph> {
        (1usize..=5).prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..3.0, n),
                prop::collection::vec(
                    (prop::collection::btree_set(0..n, 1..=n), 0.1f64..3.0),
                    1..=6,
                ),
            )
                .prop_map(|(mu, edges)| {
                    Hypergraph::new(
                        mu,
                        edges
                            .into_iter()
                            .map(|(m, l)| (m.into_iter().collect(), l))
                            .collect(),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn matches_subset_oracle(h in arb_small_hypergraph()) {
            let r = optimize_allocation(&h, TOL).unwrap();
            let oracle = critical_density(&h).unwrap();
            prop_assert!((r.z_star - oracle.z).abs() <= TOL, "{} vs {}", r.z_star, oracle.z);
        }

        #[test]
        fn feasible_and_certified(h in arb_small_hypergraph()) {
            let r = optimize_allocation(&h, TOL).unwrap();
            let load = vertex_load(&h, &r.allocation).unwrap();
            prop_assert!(load.max_rho() <= r.z_star + TOL);
            for e in 0..h.num_edges() {
                let sum: f64 = r.allocation.row(e).iter().map(|&(_, p)| p).sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(r.allocation.row(e).iter().all(|&(_, p)| p >= 0.0));
            }
            let cert = r.certificate.as_ref().expect("positive rates always yield a certificate");
            prop_assert!((subset_density(&h, cert) - r.z_star).abs() <= TOL);
        }

        #[test]
        fn weak_duality(h in arb_small_hypergraph(), mask in 1u32..64) {
            let subset: Vec<EdgeId> = (0..h.num_edges()).filter(|&e| mask & (1 << e) != 0).collect();
            prop_assume!(!subset.is_empty());
            let r = optimize_allocation(&h, TOL).unwrap();
            prop_assert!(r.z_star >= subset_density(&h, &subset) - TOL);
        }

        #[test]
        fn scaling(h in arb_small_hypergraph(), alpha in 0.2f64..5.0) {
            let z = optimize_allocation(&h, TOL).unwrap().z_star;
            let zl = optimize_allocation(&h.with_scaled_rates(alpha, 1.0).unwrap(), TOL).unwrap().z_star;
            let zm = optimize_allocation(&h.with_scaled_rates(1.0, alpha).unwrap(), TOL).unwrap().z_star;
            prop_assert!((zl - alpha * z).abs() <= TOL * alpha.max(1.0));
            prop_assert!((zm - z / alpha).abs() <= TOL);
        }

        #[test]
        fn adding_edges_is_monotone(h in arb_small_hypergraph(), lambda in 0.1f64..3.0, seed in 0usize..1000) {
            let n = h.num_vertices();
            let members: Vec<usize> = (0..n).filter(|v| (seed >> v) & 1 == 1).collect();
            let members = if members.is_empty() { vec![seed % n] } else { members };
            let z = optimize_allocation(&h, TOL).unwrap().z_star;
            let bigger = h.with_edge(members, lambda).unwrap();
            let z2 = optimize_allocation(&bigger, TOL).unwrap().z_star;
            prop_assert!(z2 >= z - TOL);
        }
    }
}
