//! Finite-horizon stability verdicts and threshold search.

use serde::{Deserialize, Serialize};

use super::{simulate, SimConfig, SimError, SimMetrics};
use crate::hypergraph::Hypergraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Inconclusive,
}

/// Thresholds of the classification rule:
///
/// - Unstable iff `growth_slope > unstable_t * se` and no queue emptied
///   after warmup.
/// - Stable iff `|growth_slope| <= stable_t * se` and every queue emptied at
///   least `min_returns` times after warmup.
/// - Inconclusive otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRule {
    pub unstable_t: f64,
    pub stable_t: f64,
    pub min_returns: u64,
}

impl Default for ClassifierRule {
    fn default() -> Self {
        ClassifierRule {
            unstable_t: 4.0,
            stable_t: 2.0,
            min_returns: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub label: StabilityLabel,
    pub growth_slope: f64,
    pub growth_slope_se: f64,
    pub regeneration_count: u64,
    /// Fewest post-warmup returns to zero over all queues.
    pub min_idle_returns: u64,
    pub mean_total_queue: f64,
}

pub fn classify_metrics(m: &SimMetrics, rule: &ClassifierRule) -> StabilityVerdict {
    let slope = m.growth_slope;
    let se = m.growth_slope_se;
    let returns = m.min_idle_returns();
    let label = if slope > rule.unstable_t * se && returns == 0 {
        StabilityLabel::Unstable
    } else if slope.abs() <= rule.stable_t * se && returns >= rule.min_returns {
        StabilityLabel::Stable
    } else {
        StabilityLabel::Inconclusive
    };
    StabilityVerdict {
        label,
        growth_slope: slope,
        growth_slope_se: se,
        regeneration_count: m.regeneration_count,
        min_idle_returns: returns,
        mean_total_queue: m.mean_total_queue(),
    }
}

/// Simulates one run and classifies it.
pub fn classify_stability(
    h: &Hypergraph,
    cfg: &SimConfig,
    rule: &ClassifierRule,
) -> Result<StabilityVerdict, SimError> {
    Ok(classify_metrics(&simulate(h, cfg)?, rule))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub horizon: f64,
    pub stream: u64,
    pub verdict: StabilityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub estimate: f64,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
    pub probes: Vec<Probe>,
}

struct Prober<'a> {
    template: &'a Hypergraph,
    base: &'a SimConfig,
    rule: &'a ClassifierRule,
    next_stream: u64,
    probes: Vec<Probe>,
}

impl Prober<'_> {
    fn run(&mut self, lambda: f64, horizon_factor: f64) -> Result<StabilityLabel, SimError> {
        let h = self.template.with_uniform_lambda(lambda)?;
        let mut cfg = self.base.clone();
        cfg.horizon *= horizon_factor;
        cfg.warmup *= horizon_factor;
        cfg.stream = self.next_stream;
        self.next_stream += 1;
        let verdict = classify_stability(&h, &cfg, self.rule)?;
        let label = verdict.label;
        self.probes.push(Probe {
            lambda,
            horizon: cfg.horizon,
            stream: cfg.stream,
            verdict,
        });
        Ok(label)
    }

    /// Inconclusive runs are retried once at twice the horizon and then
    /// counted as unstable.
    fn stable(&mut self, lambda: f64) -> Result<bool, SimError> {
        match self.run(lambda, 1.0)? {
            StabilityLabel::Stable => Ok(true),
            StabilityLabel::Unstable => Ok(false),
            StabilityLabel::Inconclusive => Ok(self.run(lambda, 2.0)? == StabilityLabel::Stable),
        }
    }
}

/// Bisection on the uniform per-edge arrival rate of a symmetric template.
///
/// Probe `i` (counting retries) runs on stream `base.stream + i`.
pub fn estimate_threshold(
    template: &Hypergraph,
    base: &SimConfig,
    rule: &ClassifierRule,
    lo: f64,
    hi: f64,
    iters: usize,
) -> Result<ThresholdEstimate, SimError> {
    if template.symmetric_rates().is_none() {
        return Err(SimError::NotSymmetric);
    }
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(SimError::BracketInvalid(format!(
            "need 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    base.validate(template)?;
    let mut prober = Prober {
        template,
        base,
        rule,
        next_stream: base.stream,
        probes: Vec::new(),
    };
    if !prober.stable(lo)? {
        return Err(SimError::BracketInvalid(format!(
            "lower end {lo} is not classified stable"
        )));
    }
    if prober.stable(hi)? {
        return Err(SimError::BracketInvalid(format!(
            "upper end {hi} is classified stable"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if prober.stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdEstimate {
        estimate: 0.5 * (lo + hi),
        lo,
        hi,
        probes: prober.probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConservationReport {
    /// `Σ_{e∋v} λ_e π_{v,e} - μ_v P(X_v > 0)` per vertex.
    pub residual: Vec<f64>,
    /// Batch-means standard error of each residual.
    pub std_error: Vec<f64>,
    pub ci_multiple: f64,
    /// Whether `|residual| < ci_multiple * std_error`.
    pub within: Vec<bool>,
}

impl RateConservationReport {
    pub fn all_within(&self) -> bool {
        self.within.iter().all(|&w| w)
    }
}

/// Compares each vertex's routed inflow with its output rate `μ_v P(X_v > 0)`.
pub fn rate_conservation_check(
    h: &Hypergraph,
    m: &SimMetrics,
    ci_multiple: f64,
) -> RateConservationReport {
    let n = h.num_vertices();
    let residual_of = |routed_share: &dyn Fn(usize, usize) -> f64, busy: &dyn Fn(usize) -> f64| {
        (0..n)
            .map(|v| {
                let inflow: f64 = h
                    .incident(v)
                    .iter()
                    .map(|&e| h.edge(e).lambda * routed_share(v, e))
                    .sum();
                inflow - h.mu(v) * busy(v)
            })
            .collect::<Vec<f64>>()
    };

    let residual = residual_of(&|v, e| m.routing_fraction(v, e), &|v| m.busy_fraction[v]);

    let per_batch: Vec<Vec<f64>> = m
        .batches
        .iter()
        .map(|b| {
            residual_of(
                &|v, e| {
                    let pos = h
                        .edge(e)
                        .position(v)
                        .expect("incident edge contains vertex");
                    if b.arrivals[e] == 0 {
                        0.0
                    } else {
                        b.routed[e][pos] as f64 / b.arrivals[e] as f64
                    }
                },
                &|v| b.busy_time[v] / b.duration(),
            )
        })
        .collect();
    let std_error: Vec<f64> = (0..n)
        .map(|v| {
            let col: Vec<f64> = per_batch.iter().map(|r| r[v]).collect();
            super::batch_mean_se(&col)
        })
        .collect();
    let within = residual
        .iter()
        .zip(&std_error)
        .map(|(r, se)| r.abs() < ci_multiple * se)
        .collect();
    RateConservationReport {
        residual,
        std_error,
        ci_multiple,
        within,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::{gen_clique_with_leaves, gen_cycle};
    use crate::simulator::{BatchStats, EdgeRouting};
    use crate::QueueState;

    fn fake_metrics(slope: f64, se: f64, returns: Vec<u64>) -> SimMetrics {
        SimMetrics {
            horizon: 1.0,
            warmup: 0.0,
            seed: 0,
            stream: 0,
            time_avg_queue: vec![0.0; returns.len()],
            time_avg_queue_se: vec![0.0; returns.len()],
            busy_fraction: vec![0.0; returns.len()],
            busy_fraction_se: vec![0.0; returns.len()],
            routing_fraction: Vec::<EdgeRouting>::new(),
            total_queue_samples: Vec::new(),
            growth_slope: slope,
            growth_slope_se: se,
            regeneration_count: 0,
            idle_returns: returns,
            event_count: 0,
            arrivals_total: 0,
            departures_total: 0,
            initial_state: QueueState(vec![]),
            final_state: QueueState(vec![]),
            batches: Vec::<BatchStats>::new(),
        }
    }

    #[test]
    fn classification_rule() {
        let rule = ClassifierRule::default();
        let label = |s, se, r| classify_metrics(&fake_metrics(s, se, r), &rule).label;
        assert_eq!(label(5.0, 1.0, vec![0, 3]), StabilityLabel::Unstable);
        assert_eq!(label(5.0, 1.0, vec![1, 3]), StabilityLabel::Inconclusive);
        assert_eq!(label(1.5, 1.0, vec![10, 30]), StabilityLabel::Stable);
        assert_eq!(label(-2.0, 1.0, vec![10, 30]), StabilityLabel::Stable);
        assert_eq!(label(1.5, 1.0, vec![9, 30]), StabilityLabel::Inconclusive);
        assert_eq!(label(3.0, 1.0, vec![10, 30]), StabilityLabel::Inconclusive);
        assert_eq!(label(3.0, 1.0, vec![0, 0]), StabilityLabel::Inconclusive);
    }

    #[test]
    fn stable_cycle_is_stable() {
        let h = gen_cycle(4, 0.5, 1.0).unwrap();
        let v = classify_stability(&h, &SimConfig::jsq(1), &ClassifierRule::default()).unwrap();
        assert_eq!(v.label, StabilityLabel::Stable, "{v:?}");
    }

    #[test]
    fn overloaded_clique_is_unstable() {
        let h = gen_clique_with_leaves(4, 0.8, 1.0).unwrap();
        let v = classify_stability(&h, &SimConfig::jsq(1), &ClassifierRule::default()).unwrap();
        assert_eq!(v.label, StabilityLabel::Unstable, "{v:?}");
        assert_eq!(v.regeneration_count, 0);
    }

    #[test]
    fn bracket_errors() {
        let h = gen_cycle(4, 1.0, 1.0).unwrap();
        let cfg = SimConfig::jsq(1).with_horizon(2_000.0);
        let rule = ClassifierRule::default();
        assert!(matches!(
            estimate_threshold(&h, &cfg, &rule, 1.0, 0.5, 3),
            Err(SimError::BracketInvalid(_))
        ));
        // Both ends stable.
        assert!(matches!(
            estimate_threshold(&h, &cfg, &rule, 0.1, 0.2, 3),
            Err(SimError::BracketInvalid(_))
        ));
        let asym = Hypergraph::new(vec![1.0, 2.0], vec![(vec![0, 1], 1.0)]).unwrap();
        assert!(matches!(
            estimate_threshold(&asym, &cfg, &rule, 0.1, 2.0, 3),
            Err(SimError::NotSymmetric)
        ));
    }

    #[test]
    fn rate_conservation_on_single_queue() {
        let h = Hypergraph::new(vec![1.0], vec![(vec![0], 0.5)]).unwrap();
        let m = simulate(&h, &SimConfig::jsq(8)).unwrap();
        let r = rate_conservation_check(&h, &m, 3.0);
        assert!((r.residual[0] - (0.5 - m.busy_fraction[0])).abs() < 1e-12);
        assert!(r.all_within(), "{r:?}");
    }

    #[test]
    fn overloaded_vertices_show_negative_residuals() {
        let h = gen_clique_with_leaves(4, 0.8, 1.0).unwrap();
        let m = simulate(&h, &SimConfig::jsq(3).with_horizon(20_000.0)).unwrap();
        let r = rate_conservation_check(&h, &m, 3.0);
        // Saturated clique vertices receive more than they can serve.
        for v in 0..4 {
            assert!(m.busy_fraction[v] > 0.99);
            assert!(r.residual[v] > 0.05, "{:?}", r.residual);
        }
    }
}
