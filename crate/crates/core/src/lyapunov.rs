//! Quadratic Lyapunov function `L(x) = Σ_v x_v²` and its generator drift
//! under JSQ routing.
//!
//! From state `x`, vertex `v` completes a job at rate `μ_v` when busy
//! (`ΔL = 1 - 2x_v`) and each edge `e` receives an arrival at rate `λ_e` that
//! joins a shortest member queue (`ΔL = 2m_e + 1` with `m_e = min_{v∈e} x_v`).
//! For any static allocation `P`, `m_e <= Σ_{v∈e} p_{v,e} x_v`, which gives
//!
//! ```text
//! drift(x) <= -2 Σ_v μ_v x_v + 2 Σ_v Σ_{e∋v} λ_e p_{v,e} x_v + c
//!          <= -2 ε Σ_v x_v + c,     ε = min_v (μ_v - λ_v(P)),
//! ```
//!
//! with `c = Σ_v μ_v + Σ_e λ_e`. The drift is below `-δ` once
//! `Σ_v x_v > (c + δ) / (2ε)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{vertex_load, AllocationError, StaticAllocation};
use crate::hypergraph::Hypergraph;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("state has {got} entries but the hypergraph has {expected} vertices")]
    StateLength { expected: usize, got: usize },
    #[error("no stable static allocation provided: epsilon gap is {0}")]
    NoStableAllocation(f64),
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

#[derive(Debug, Error)]
#[error("invalid queue state {input:?}: expected comma-separated nonnegative integers")]
pub struct ParseStateError {
    input: String,
}

/// Queue length at every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QueueState(pub Vec<u64>);

impl QueueState {
    pub fn zeros(n: usize) -> Self {
        QueueState(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn check_len(&self, h: &Hypergraph) -> Result<(), DriftError> {
        if self.0.len() == h.num_vertices() {
            Ok(())
        } else {
            Err(DriftError::StateLength {
                expected: h.num_vertices(),
                got: self.0.len(),
            })
        }
    }
}

impl FromStr for QueueState {
    type Err = ParseStateError;

    /// Parses `"2,5,0"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map(QueueState)
            .map_err(|_| ParseStateError {
                input: s.to_owned(),
            })
    }
}

impl fmt::Display for QueueState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub lyapunov: f64,
    pub exact: f64,
    pub bound: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Absent when `epsilon <= 0`.
    pub threshold: Option<f64>,
    pub delta: f64,
}

pub fn lyapunov_value(x: &QueueState) -> f64 {
    x.0.iter()
        .map(|&q| u128::from(q) * u128::from(q))
        .sum::<u128>() as f64
}

/// Generator of the JSQ chain applied to `L` at `x`. Independent of the tie
/// rule: every minimizer of an edge has the same queue length.
pub fn exact_drift(h: &Hypergraph, x: &QueueState) -> Result<f64, DriftError> {
    x.check_len(h)?;
    let q = &x.0;
    let departures: f64 = q
        .iter()
        .zip(h.mus())
        .filter(|(&xv, _)| xv > 0)
        .map(|(&xv, mu)| mu * (1 - 2 * i128::from(xv)) as f64)
        .sum();
    let arrivals: f64 = h
        .edges()
        .iter()
        .map(|e| {
            let m = e.members.iter().map(|&v| q[v]).min().unwrap_or(0);
            e.lambda * (2 * i128::from(m) + 1) as f64
        })
        .sum();
    Ok(departures + arrivals)
}

/// The state-independent constant `c = Σ_v μ_v + Σ_e λ_e`.
pub fn drift_constant(h: &Hypergraph) -> f64 {
    h.total_service_rate() + h.total_arrival_rate()
}

/// Returns `(bound, c)` where `bound >= exact_drift(h, x)` for every state.
///
/// The bound equals `-2 Σ_v μ_v x_v + 2 Σ_v λ_v(P) x_v + c`. Since every row of
/// `P` sums to one, it is evaluated as the exact drift plus the nonnegative
/// slack `Σ_{v: x_v = 0} μ_v + 2 Σ_e λ_e Σ_{v∈e} p_{v,e} (x_v - m_e)`, which
/// keeps the domination exact in floating point when the slack is zero.
pub fn drift_upper_bound(
    h: &Hypergraph,
    p: &StaticAllocation,
    x: &QueueState,
) -> Result<(f64, f64), DriftError> {
    let exact = exact_drift(h, x)?;
    p.check_compatible(h)?;
    let q = &x.0;
    let idle: f64 = q
        .iter()
        .zip(h.mus())
        .filter(|(&xv, _)| xv == 0)
        .map(|(_, mu)| mu)
        .sum();
    let routing_slack: f64 = h
        .edges()
        .iter()
        .map(|e| {
            let m = e.members.iter().map(|&v| q[v]).min().unwrap_or(0);
            let excess: f64 = p
                .row(e.id)
                .iter()
                .map(|&(v, pv)| pv * (q[v] - m) as f64)
                .sum();
            e.lambda * excess
        })
        .sum();
    Ok((exact + (idle + 2.0 * routing_slack), drift_constant(h)))
}

/// `ε = min_v (μ_v - λ_v(P))`; positive iff `P` is a stable allocation.
pub fn epsilon_gap(h: &Hypergraph, p: &StaticAllocation) -> Result<f64, DriftError> {
    let load = vertex_load(h, p)?;
    Ok(h.mus()
        .iter()
        .zip(&load.lambda)
        .map(|(mu, l)| mu - l)
        .fold(f64::INFINITY, f64::min))
}

/// Total queue size `(c + δ) / (2ε)` beyond which the drift is below `-δ`.
pub fn negative_drift_threshold(
    h: &Hypergraph,
    p: &StaticAllocation,
    delta: f64,
) -> Result<f64, DriftError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(DriftError::InvalidDelta(delta));
    }
    let eps = epsilon_gap(h, p)?;
    if eps <= 0.0 {
        return Err(DriftError::NoStableAllocation(eps));
    }
    Ok((drift_constant(h) + delta) / (2.0 * eps))
}

pub fn drift_report(
    h: &Hypergraph,
    p: &StaticAllocation,
    x: &QueueState,
    delta: f64,
) -> Result<DriftReport, DriftError> {
    let exact = exact_drift(h, x)?;
    let (bound, c) = drift_upper_bound(h, p, x)?;
    let epsilon = epsilon_gap(h, p)?;
    let threshold = match negative_drift_threshold(h, p, delta) {
        Ok(t) => Some(t),
        Err(DriftError::NoStableAllocation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(DriftReport {
        lyapunov: lyapunov_value(x),
        exact,
        bound,
        c,
        epsilon,
        threshold,
        delta,
    })
}
