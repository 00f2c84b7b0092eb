use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::stats::{batch_mean_se, least_squares};
use super::{BatchStats, EdgeRouting, Policy, SimConfig, SimError, SimMetrics, TieBreak};
use crate::hypergraph::{EdgeId, Hypergraph, VertexId};
use crate::lyapunov::QueueState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Arrival { edge: EdgeId, vertex: VertexId },
    Departure { vertex: VertexId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// A single run of the chain, advanced one event at a time.
pub struct Simulation<'a> {
    h: &'a Hypergraph,
    policy: &'a Policy,
    horizon: f64,
    warmup: f64,
    seed: u64,
    stream: u64,
    sample_interval: f64,
    rng: ChaCha8Rng,

    x: Vec<u64>,
    t: f64,
    total: u64,
    busy_count: usize,
    busy_mu: f64,
    lambda_total: f64,
    cum_lambda: Vec<f64>,
    last_active_edge: Option<EdgeId>,
    /// Cumulative routing probabilities per edge under a static policy.
    static_cum: Vec<Vec<f64>>,

    bounds: Vec<f64>,
    batches: Vec<BatchStats>,
    last_change: Vec<f64>,
    last_total_change: f64,
    samples: Vec<(f64, u64)>,
    samples_taken: u64,
    regenerations: u64,
    idle_returns: Vec<u64>,
    events: u64,
    arrivals_total: u64,
    departures_total: u64,
    initial: QueueState,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(h: &'a Hypergraph, cfg: &'a SimConfig) -> Result<Self, SimError> {
        cfg.validate(h)?;
        let n = h.num_vertices();
        let m = h.num_edges();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);

        let x = cfg
            .initial_state
            .clone()
            .unwrap_or_else(|| QueueState::zeros(n))
            .0;
        let busy: Vec<VertexId> = (0..n).filter(|&v| x[v] > 0).collect();
        let busy_mu = busy.iter().map(|&v| h.mu(v)).sum();

        let mut acc = 0.0;
        let cum_lambda = h
            .edges()
            .iter()
            .map(|e| {
                acc += e.lambda;
                acc
            })
            .collect();
        let last_active_edge = h.edges().iter().rposition(|e| e.lambda > 0.0);

        let static_cum = match &cfg.policy {
            Policy::Static(p) => (0..m)
                .map(|e| {
                    let mut acc = 0.0;
                    p.row(e)
                        .iter()
                        .map(|&(_, pv)| {
                            acc += pv;
                            acc
                        })
                        .collect()
                })
                .collect(),
            Policy::Jsq(_) => Vec::new(),
        };

        let nb = cfg.batches;
        let span = cfg.horizon - cfg.warmup;
        let mut bounds: Vec<f64> = (0..nb)
            .map(|i| cfg.warmup + span * i as f64 / nb as f64)
            .collect();
        bounds.push(cfg.horizon);
        let batches = bounds
            .windows(2)
            .map(|w| BatchStats {
                start: w[0],
                end: w[1],
                queue_time: vec![0.0; n],
                busy_time: vec![0.0; n],
                total_queue_time: 0.0,
                arrivals: vec![0; m],
                routed: h.edges().iter().map(|e| vec![0; e.members.len()]).collect(),
            })
            .collect();

        Ok(Simulation {
            h,
            policy: &cfg.policy,
            horizon: cfg.horizon,
            warmup: cfg.warmup,
            seed: cfg.seed,
            stream: cfg.stream,
            sample_interval: cfg.sample_interval,
            rng,
            total: x.iter().sum(),
            busy_count: busy.len(),
            busy_mu,
            initial: QueueState(x.clone()),
            x,
            t: 0.0,
            lambda_total: h.total_arrival_rate(),
            cum_lambda,
            last_active_edge,
            static_cum,
            bounds,
            batches,
            last_change: vec![0.0; n],
            last_total_change: 0.0,
            samples: Vec::new(),
            samples_taken: 0,
            regenerations: 0,
            idle_returns: vec![0; n],
            events: 0,
            arrivals_total: 0,
            departures_total: 0,
            finished: false,
        })
    }

    pub fn state(&self) -> &[u64] {
        &self.x
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Applies the next event, or returns `None` once the horizon is reached.
    pub fn step(&mut self) -> Option<Event> {
        if self.finished {
            return None;
        }
        let rate = self.lambda_total + self.busy_mu;
        let t_next = if rate > 0.0 {
            let e: f64 = self.rng.sample(Exp1);
            self.t + e / rate
        } else {
            f64::INFINITY
        };
        if t_next >= self.horizon {
            self.record_samples(self.horizon, true);
            self.t = self.horizon;
            self.finished = true;
            return None;
        }
        self.record_samples(t_next, false);
        self.t = t_next;
        self.flush_total();
        self.events += 1;

        let u = self.rng.random::<f64>() * rate;
        let kind = if u < self.lambda_total {
            let edge = self.pick_edge(u);
            let vertex = self.route(edge);
            self.arrive(edge, vertex);
            EventKind::Arrival { edge, vertex }
        } else {
            let vertex = self.pick_departure(u - self.lambda_total);
            self.depart(vertex);
            EventKind::Departure { vertex }
        };
        Some(Event { time: t_next, kind })
    }

    /// Runs to the horizon and summarizes the measurement window.
    pub fn finish(mut self) -> SimMetrics {
        while self.step().is_some() {}
        for v in 0..self.x.len() {
            self.flush_vertex(v);
        }
        self.flush_total();
        self.into_metrics()
    }

    fn record_samples(&mut self, until: f64, inclusive: bool) {
        loop {
            let ts = self.samples_taken as f64 * self.sample_interval;
            let due = if inclusive { ts <= until } else { ts < until };
            if !due {
                break;
            }
            self.samples.push((ts, self.total));
            self.samples_taken += 1;
        }
    }

    fn pick_edge(&self, u: f64) -> EdgeId {
        let e = self.cum_lambda.partition_point(|&c| c <= u);
        match self.last_active_edge {
            Some(last) if e > last => last,
            _ => e,
        }
    }

    fn route(&mut self, edge: EdgeId) -> VertexId {
        let members = &self.h.edge(edge).members;
        if members.len() == 1 {
            return members[0];
        }
        match self.policy {
            Policy::Static(p) => {
                let r: f64 = self.rng.random();
                let cum = &self.static_cum[edge];
                let i = cum.partition_point(|&c| c <= r);
                if i < members.len() {
                    members[i]
                } else {
                    // Round-off past the last cumulative value.
                    let row = p.row(edge);
                    row.iter()
                        .rev()
                        .find(|&&(_, pv)| pv > 0.0)
                        .unwrap_or(&row[0])
                        .0
                }
            }
            Policy::Jsq(TieBreak::LowestIndex) => {
                *members.iter().min_by_key(|&&v| (self.x[v], v)).unwrap()
            }
            Policy::Jsq(TieBreak::UniformRandom) => {
                let mut best = members[0];
                let mut best_q = self.x[best];
                let mut ties = 1u32;
                for &v in &members[1..] {
                    let q = self.x[v];
                    if q < best_q {
                        best = v;
                        best_q = q;
                        ties = 1;
                    } else if q == best_q {
                        ties += 1;
                        if self.rng.random_range(0..ties) == 0 {
                            best = v;
                        }
                    }
                }
                best
            }
        }
    }

    fn pick_departure(&self, mut u: f64) -> VertexId {
        let mut last = None;
        for (v, &q) in self.x.iter().enumerate() {
            if q > 0 {
                let mu = self.h.mu(v);
                if u < mu {
                    return v;
                }
                u -= mu;
                last = Some(v);
            }
        }
        last.expect("departure drawn with no busy vertex")
    }

    fn arrive(&mut self, edge: EdgeId, v: VertexId) {
        self.flush_vertex(v);
        self.x[v] += 1;
        self.total += 1;
        self.arrivals_total += 1;
        if self.x[v] == 1 {
            self.busy_count += 1;
            self.busy_mu += self.h.mu(v);
        }
        if let Some(b) = self.batch_of(self.t) {
            let pos = self.h.edge(edge).position(v).expect("routed to a member");
            let batch = &mut self.batches[b];
            batch.arrivals[edge] += 1;
            batch.routed[edge][pos] += 1;
        }
    }

    fn depart(&mut self, v: VertexId) {
        self.flush_vertex(v);
        self.x[v] -= 1;
        self.total -= 1;
        self.departures_total += 1;
        let measured = self.t >= self.warmup;
        if self.x[v] == 0 {
            self.busy_count -= 1;
            self.busy_mu = if self.busy_count == 0 {
                0.0
            } else {
                self.busy_mu - self.h.mu(v)
            };
            if measured {
                self.idle_returns[v] += 1;
            }
        }
        if self.total == 0 && measured {
            self.regenerations += 1;
        }
    }

    fn batch_of(&self, t: f64) -> Option<usize> {
        if t < self.warmup {
            return None;
        }
        let nb = self.batches.len();
        Some(
            self.bounds
                .partition_point(|&s| s <= t)
                .saturating_sub(1)
                .min(nb - 1),
        )
    }

    fn flush_vertex(&mut self, v: VertexId) {
        let q = self.x[v] as f64;
        let busy = self.x[v] > 0;
        let (a, b) = (self.last_change[v], self.t);
        self.last_change[v] = b;
        if q == 0.0 {
            return;
        }
        let batches = &mut self.batches;
        spread(&self.bounds, a, b, |i, dt| {
            batches[i].queue_time[v] += q * dt;
            if busy {
                batches[i].busy_time[v] += dt;
            }
        });
    }

    fn flush_total(&mut self) {
        let q = self.total as f64;
        let (a, b) = (self.last_total_change, self.t);
        self.last_total_change = b;
        if q == 0.0 {
            return;
        }
        let batches = &mut self.batches;
        spread(&self.bounds, a, b, |i, dt| {
            batches[i].total_queue_time += q * dt
        });
    }

    fn into_metrics(self) -> SimMetrics {
        let n = self.x.len();
        let measured = self.horizon - self.warmup;
        let per_vertex = |f: &dyn Fn(&BatchStats, usize) -> f64| -> (Vec<f64>, Vec<f64>) {
            let mut means = Vec::with_capacity(n);
            let mut ses = Vec::with_capacity(n);
            for v in 0..n {
                let per_batch: Vec<f64> = self
                    .batches
                    .iter()
                    .map(|b| f(b, v) / b.duration())
                    .collect();
                let total: f64 = self.batches.iter().map(|b| f(b, v)).sum();
                means.push(total / measured);
                ses.push(batch_mean_se(&per_batch));
            }
            (means, ses)
        };
        let (time_avg_queue, time_avg_queue_se) = per_vertex(&|b, v| b.queue_time[v]);
        let (busy_fraction, busy_fraction_se) = per_vertex(&|b, v| b.busy_time[v]);

        let routing_fraction = self
            .h
            .edges()
            .iter()
            .map(|edge| {
                let arrivals: u64 = self.batches.iter().map(|b| b.arrivals[edge.id]).sum();
                let fraction: BTreeMap<VertexId, f64> = edge
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let routed: u64 = self.batches.iter().map(|b| b.routed[edge.id][i]).sum();
                        let f = if arrivals > 0 {
                            routed as f64 / arrivals as f64
                        } else {
                            0.0
                        };
                        (v, f)
                    })
                    .collect();
                EdgeRouting {
                    edge: edge.id,
                    arrivals,
                    fraction,
                }
            })
            .collect();

        let mids: Vec<f64> = self
            .batches
            .iter()
            .map(|b| 0.5 * (b.start + b.end))
            .collect();
        let totals: Vec<f64> = self
            .batches
            .iter()
            .map(|b| b.total_queue_time / b.duration())
            .collect();
        let (growth_slope, growth_slope_se) = least_squares(&mids, &totals);

        SimMetrics {
            horizon: self.horizon,
            warmup: self.warmup,
            seed: self.seed,
            stream: self.stream,
            time_avg_queue,
            time_avg_queue_se,
            busy_fraction,
            busy_fraction_se,
            routing_fraction,
            total_queue_samples: self.samples,
            growth_slope,
            growth_slope_se,
            regeneration_count: self.regenerations,
            idle_returns: self.idle_returns,
            event_count: self.events,
            arrivals_total: self.arrivals_total,
            departures_total: self.departures_total,
            initial_state: self.initial,
            final_state: QueueState(self.x),
            batches: self.batches,
        }
    }
}

/// Splits `[a, b]`, clipped to the measurement window, across batches and
/// calls `f(batch, overlap)` for each.
fn spread(bounds: &[f64], a: f64, b: f64, mut f: impl FnMut(usize, f64)) {
    let nb = bounds.len() - 1;
    let lo = a.max(bounds[0]);
    let hi = b.min(bounds[nb]);
    if hi <= lo {
        return;
    }
    let mut i = bounds
        .partition_point(|&s| s <= lo)
        .saturating_sub(1)
        .min(nb - 1);
    let mut cur = lo;
    while cur < hi && i < nb {
        let end = hi.min(bounds[i + 1]);
        if end > cur {
            f(i, end - cur);
            cur = end;
        }
        i += 1;
    }
}

/// Runs the chain from `cfg.initial_state` to `cfg.horizon`.
pub fn simulate(h: &Hypergraph, cfg: &SimConfig) -> Result<SimMetrics, SimError> {
    Ok(Simulation::new(h, cfg)?.finish())
}
