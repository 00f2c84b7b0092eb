//! Event-driven simulation of the hypergraph queueing system.
//!
//! The queue-length process is a continuous-time Markov chain. From state
//! `x` the next event happens after an `Exp(R(x))` delay with
//! `R(x) = Σ_e λ_e + Σ_{v: x_v > 0} μ_v`, and is an arrival on edge `e` with
//! probability `λ_e / R(x)` or a departure from busy vertex `v` with
//! probability `μ_v / R(x)`. Arrivals are routed by the configured
//! [`Policy`].
//!
//! Runs are reproducible: the random stream is a ChaCha8 generator seeded with
//! [`SimConfig::seed`] and switched to stream [`SimConfig::stream`], so
//! independent replications share a seed and differ by stream number.

mod classify;
mod engine;
mod stats;

pub use classify::{
    classify_metrics, classify_stability, estimate_threshold, rate_conservation_check,
    ClassifierRule, Probe, RateConservationReport, StabilityLabel, StabilityVerdict,
    ThresholdEstimate,
};
pub use engine::{simulate, Event, EventKind, Simulation};
pub use stats::{batch_mean_se, least_squares};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AllocationError, StaticAllocation};
use crate::hypergraph::{EdgeId, GraphError, Hypergraph, VertexId};
use crate::lyapunov::QueueState;

pub const DEFAULT_HORIZON: f64 = 1e5;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;
pub const DEFAULT_BATCHES: usize = 32;
const MAX_SAMPLES: f64 = 1e7;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon ({horizon}) must exceed warmup ({warmup}) and warmup must be nonnegative")]
    Window { horizon: f64, warmup: f64 },
    #[error("sample interval must be positive, got {0}")]
    SampleInterval(f64),
    #[error("sample interval {interval} over horizon {horizon} would record more than {MAX_SAMPLES} samples")]
    TooManySamples { interval: f64, horizon: f64 },
    #[error("at least 3 batches are needed, got {0}")]
    Batches(usize),
    #[error("initial state has {got} entries but the hypergraph has {expected} vertices")]
    InitialState { expected: usize, got: usize },
    #[error("bracket invalid: {0}")]
    BracketInvalid(String),
    #[error("hypergraph is not symmetric; threshold estimation scales a uniform per-edge rate")]
    NotSymmetric,
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniformly among the shortest member queues.
    UniformRandom,
    /// The shortest member queue with the lowest vertex index.
    LowestIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Static(StaticAllocation),
    Jsq(TieBreak),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub policy: Policy,
    pub horizon: f64,
    /// Time discarded before measuring.
    pub warmup: f64,
    pub seed: u64,
    pub stream: u64,
    /// All-zero when absent.
    pub initial_state: Option<QueueState>,
    pub sample_interval: f64,
    /// Number of equal-length batches the measurement window is split into
    /// for standard errors.
    pub batches: usize,
}

impl SimConfig {
    /// Horizon `1e5`, warmup 10%, unit sampling interval, empty start.
    pub fn new(policy: Policy, seed: u64) -> Self {
        SimConfig {
            policy,
            horizon: DEFAULT_HORIZON,
            warmup: DEFAULT_HORIZON * DEFAULT_WARMUP_FRACTION,
            seed,
            stream: 0,
            initial_state: None,
            sample_interval: DEFAULT_SAMPLE_INTERVAL,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn jsq(seed: u64) -> Self {
        Self::new(Policy::Jsq(TieBreak::UniformRandom), seed)
    }

    /// Sets the horizon and a warmup of 10% of it.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self.warmup = horizon * DEFAULT_WARMUP_FRACTION;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self, h: &Hypergraph) -> Result<(), SimError> {
        if !(self.warmup >= 0.0 && self.horizon > self.warmup && self.horizon.is_finite()) {
            return Err(SimError::Window {
                horizon: self.horizon,
                warmup: self.warmup,
            });
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(SimError::SampleInterval(self.sample_interval));
        }
        if self.horizon / self.sample_interval > MAX_SAMPLES {
            return Err(SimError::TooManySamples {
                interval: self.sample_interval,
                horizon: self.horizon,
            });
        }
        if self.batches < 3 {
            return Err(SimError::Batches(self.batches));
        }
        if let Some(x) = &self.initial_state {
            if x.len() != h.num_vertices() {
                return Err(SimError::InitialState {
                    expected: h.num_vertices(),
                    got: x.len(),
                });
            }
        }
        if let Policy::Static(p) = &self.policy {
            p.check_compatible(h)?;
        }
        Ok(())
    }
}

/// Measurements from one batch of the post-warmup window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub start: f64,
    pub end: f64,
    /// `∫ x_v dt` over the batch.
    pub queue_time: Vec<f64>,
    /// `∫ 1{x_v > 0} dt` over the batch.
    pub busy_time: Vec<f64>,
    /// `∫ Σ_v x_v dt` over the batch.
    pub total_queue_time: f64,
    pub arrivals: Vec<u64>,
    /// Arrivals of edge `e` routed to its `i`-th member, `routed[e][i]`.
    pub routed: Vec<Vec<u64>>,
}

impl BatchStats {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Post-warmup routing counts for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRouting {
    pub edge: EdgeId,
    pub arrivals: u64,
    /// Empirical `π_{v,e}`, keyed by member vertex.
    pub fraction: BTreeMap<VertexId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub stream: u64,
    pub time_avg_queue: Vec<f64>,
    pub time_avg_queue_se: Vec<f64>,
    /// Empirical `P(X_v > 0)`.
    pub busy_fraction: Vec<f64>,
    pub busy_fraction_se: Vec<f64>,
    pub routing_fraction: Vec<EdgeRouting>,
    /// `(t, Σ_v x_v(t))` every `sample_interval`, from time zero.
    pub total_queue_samples: Vec<(f64, u64)>,
    /// Least-squares slope of the batch-averaged total queue against time.
    pub growth_slope: f64,
    pub growth_slope_se: f64,
    /// Post-warmup returns of the whole state to all-zero.
    pub regeneration_count: u64,
    /// Post-warmup returns of each queue to zero.
    pub idle_returns: Vec<u64>,
    pub event_count: u64,
    pub arrivals_total: u64,
    pub departures_total: u64,
    pub initial_state: QueueState,
    pub final_state: QueueState,
    pub batches: Vec<BatchStats>,
}

impl SimMetrics {
    /// Empirical `π_{v,e}`; zero when `v ∉ e` or `e` saw no arrivals.
    pub fn routing_fraction(&self, v: VertexId, e: EdgeId) -> f64 {
        self.routing_fraction
            .get(e)
            .and_then(|r| r.fraction.get(&v))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn mean_total_queue(&self) -> f64 {
        self.time_avg_queue.iter().sum()
    }

    /// Time-average total queue with its batch-means standard error.
    pub fn mean_total_queue_with_se(&self) -> (f64, f64) {
        let means: Vec<f64> = self
            .batches
            .iter()
            .map(|b| b.total_queue_time / b.duration())
            .collect();
        (self.mean_total_queue(), batch_mean_se(&means))
    }

    pub fn min_idle_returns(&self) -> u64 {
        self.idle_returns.iter().copied().min().unwrap_or(0)
    }

    /// `vertex,time_avg_queue,busy_fraction` rows with a header.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("vertex,time_avg_queue,busy_fraction\n");
        for (v, (q, b)) in self
            .time_avg_queue
            .iter()
            .zip(&self.busy_fraction)
            .enumerate()
        {
            out.push_str(&format!("{v},{q},{b}\n"));
        }
        out
    }

    /// `t,total_queue` rows with a header.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,total_queue\n");
        for (t, q) in &self.total_queue_samples {
            out.push_str(&format!("{t},{q}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics always serialize")
    }
}
