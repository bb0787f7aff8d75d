//! Run logs, regret against the periodic benchmark, the no-regret bound and
//! constraint-violation counts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::benchmark::BenchmarkSolution;
use crate::cost::{
    accumulate_gradient, alpha_cost, loads_unchecked, penalized_cost_from_loads, AssociationPolicy, CostParams,
    GradientMatrix, LoadVector,
};
use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::traffic::{TimePartition, TrafficTrace};

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: usize,
    pub zone: usize,
    /// Penalised cost `V(pi(t), lambda(t))`.
    pub cost: f64,
    /// `sum_j rho_j`.
    pub total_load: f64,
    pub loads: Vec<f64>,
    /// `rho_j > rho0` per AP.
    pub violations: Vec<bool>,
    /// `max |dV/dpi_ji|` at the played policy.
    pub grad_inf_norm: f64,
}

impl SlotRecord {
    pub fn new(t: usize, zone: usize, cost: f64, loads: LoadVector, rho0: f64, grad_inf_norm: f64) -> Self {
        let violations = loads.0.iter().map(|&r| r > rho0).collect();
        Self {
            t,
            zone,
            cost,
            total_load: loads.total(),
            loads: loads.0,
            violations,
            grad_inf_norm,
        }
    }

    pub fn violation_count(&self) -> usize {
        self.violations.iter().filter(|v| **v).count()
    }
}

/// Per-slot history of a policy sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub rho0: f64,
    pub slots: Vec<SlotRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<AssociationPolicy>>,
    /// Policy entries that underflowed to zero during the run.
    #[serde(default)]
    pub underflow_events: usize,
}

impl RunLog {
    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.cost).collect()
    }

    pub fn total_cost(&self) -> f64 {
        self.slots.iter().map(|s| s.cost).sum()
    }

    /// Largest gradient norm seen over the run.
    pub fn empirical_lipschitz(&self) -> f64 {
        self.slots.iter().map(|s| s.grad_inf_norm).fold(0.0, f64::max)
    }

    /// `t,zone,V,total_load,violations` with one row per slot; the last
    /// column counts overloaded APs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,zone,V,total_load,violations\n");
        for s in &self.slots {
            let _ = writeln!(out, "{},{},{},{},{}", s.t, s.zone, s.cost, s.total_load, s.violation_count());
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Aggregate overload counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    /// Number of `(t, j)` pairs with `rho_j(t) > rho0`.
    pub slot_ap: usize,
    /// Number of slots with at least one overloaded AP.
    pub slots: usize,
}

pub fn count_violations(log: &RunLog) -> ViolationCounts {
    log.slots.iter().fold(ViolationCounts::default(), |acc, s| {
        let n = s.violation_count();
        ViolationCounts {
            slot_ap: acc.slot_ap + n,
            slots: acc.slots + usize::from(n > 0),
        }
    })
}

fn check_alignment(trace: &TrafficTrace, partition: &TimePartition, topology: &Topology) -> Result<()> {
    if partition.horizon() != trace.horizon() {
        return Err(Error::Dimension {
            context: "partition horizon",
            expected: trace.horizon(),
            actual: partition.horizon(),
        });
    }
    if trace.n_locations() != topology.n_locations() {
        return Err(Error::Dimension {
            context: "trace locations",
            expected: topology.n_locations(),
            actual: trace.n_locations(),
        });
    }
    Ok(())
}

/// Replays the per-zone benchmark policies over the trace.
pub fn benchmark_log(
    benchmark: &BenchmarkSolution,
    trace: &TrafficTrace,
    partition: &TimePartition,
    topology: &Topology,
    params: &CostParams,
) -> Result<RunLog> {
    check_alignment(trace, partition, topology)?;
    if benchmark.zones() != partition.zones() {
        return Err(Error::Dimension {
            context: "benchmark zones",
            expected: partition.zones(),
            actual: benchmark.zones(),
        });
    }
    let mut slots: Vec<Option<SlotRecord>> = vec![None; trace.horizon()];
    let mut g = GradientMatrix::zeros(topology.n_aps(), topology.n_locations());
    for (k, window) in partition.windows().iter().enumerate() {
        let policy = &benchmark.zone(k + 1).policy;
        for &t in window {
            let lambda = trace.slot(t);
            let loads = loads_unchecked(policy, lambda, topology);
            let cost = penalized_cost_from_loads(&loads, params);
            g.fill_zero();
            accumulate_gradient(&mut g, &loads.0, lambda, topology, params);
            slots[t - 1] = Some(SlotRecord::new(t, k + 1, cost, loads, params.rho0, g.inf_norm()));
        }
    }
    Ok(RunLog {
        rho0: params.rho0,
        slots: slots.into_iter().map(|s| s.expect("windows cover the horizon")).collect(),
        policies: None,
        underflow_events: 0,
    })
}

/// Theorem-style bound terms for the periodic learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    /// `K M_I log(M_J) / (eta M_J) + eta T L^2 / (2 |I|)` at the given eta.
    pub general: f64,
    /// The general bound evaluated at `eta_star`.
    pub optimal_eta_bound: f64,
    /// `L sqrt(2 K T)`, which dominates `optimal_eta_bound`.
    pub universal_bound: f64,
    /// Minimiser of the general bound; `None` when `L = 0`.
    pub eta_star: Option<f64>,
    pub degenerate: Option<BoundDegeneracy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundDegeneracy {
    /// `L = 0`: every gradient vanishes and any step size is optimal.
    ZeroGradient,
    /// `M_J = 1`: every location has one AP, nothing to learn, `eta_star = 0`.
    SingleNeighbour,
}

/// Evaluates the regret bound with natural logarithms.
pub fn theoretical_bound(
    zones: usize,
    horizon: usize,
    lipschitz: f64,
    eta: f64,
    max_locations_per_ap: usize,
    max_aps_per_location: usize,
    n_locations: usize,
) -> Result<TheoremBound> {
    for (name, v) in [
        ("K", zones),
        ("T", horizon),
        ("M_I", max_locations_per_ap),
        ("M_J", max_aps_per_location),
        ("|I|", n_locations),
    ] {
        if v == 0 {
            return Err(Error::Domain(format!("{name} must be positive")));
        }
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::Domain(format!("eta must be finite and > 0, got {eta}")));
    }
    if !lipschitz.is_finite() || lipschitz < 0.0 {
        return Err(Error::Domain(format!("L must be finite and >= 0, got {lipschitz}")));
    }
    let k = zones as f64;
    let t = horizon as f64;
    let m_i = max_locations_per_ap as f64;
    let m_j = max_aps_per_location as f64;
    let n = n_locations as f64;
    let l2 = lipschitz * lipschitz;
    let log_mj = m_j.ln();

    let general = k * m_i * log_mj / (eta * m_j) + eta * t * l2 / (2.0 * n);
    let optimal_eta_bound = (2.0 * k * m_i * t * l2 * log_mj / (n * m_j)).sqrt();
    let universal_bound = lipschitz * (2.0 * k * t).sqrt();
    let (eta_star, degenerate) = if lipschitz == 0.0 {
        (None, Some(BoundDegeneracy::ZeroGradient))
    } else if max_aps_per_location == 1 {
        (Some(0.0), Some(BoundDegeneracy::SingleNeighbour))
    } else {
        (Some((2.0 * k * m_i * n * log_mj / (t * l2 * m_j)).sqrt()), None)
    };
    Ok(TheoremBound {
        general,
        optimal_eta_bound,
        universal_bound,
        eta_star,
        degenerate,
    })
}

/// Where the Lipschitz constant used in a bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSource {
    /// Analytic bound from the topology, the trace's peak demand and the cost.
    #[default]
    Analytic,
    /// Largest gradient norm observed during the run.
    Empirical,
}

/// Bound evaluation attached to a regret report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lipschitz: f64,
    pub lipschitz_source: LipschitzSource,
    pub eta: f64,
    #[serde(flatten)]
    pub terms: TheoremBound,
    /// Measured regret does not exceed the general bound at `eta`.
    pub within_general_bound: bool,
    /// Measured regret does not exceed `L sqrt(2 K T)`.
    pub within_universal_bound: bool,
}

/// Online play against the periodic-static benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub zones: usize,
    pub horizon: usize,
    pub total_online_cost: f64,
    pub total_benchmark_cost: f64,
    /// `total_online_cost - total_benchmark_cost`.
    pub regret: f64,
    /// `Reg(t, K) / t` for `t = 1..=T`.
    pub regret_rate: Vec<f64>,
    /// Regret restricted to each window `W_k`.
    pub window_regret: Vec<f64>,
    /// Same comparison on the raw alpha-fair cost, when every load of both
    /// runs lies in its domain.
    pub raw_cost_regret: Option<f64>,
    pub bound: Option<BoundReport>,
    pub violations_online: Option<ViolationCounts>,
    pub violations_benchmark: Option<ViolationCounts>,
}

impl RegretReport {
    /// Evaluates the theorem bound for this run and records whether the
    /// measured regret respects it.
    pub fn attach_bound(
        &mut self,
        topology: &Topology,
        lipschitz: f64,
        source: LipschitzSource,
        eta: f64,
    ) -> Result<&BoundReport> {
        let (m_i, m_j) = topology.max_degrees();
        let terms = theoretical_bound(self.zones, self.horizon, lipschitz, eta, m_i, m_j, topology.n_locations())?;
        self.bound = Some(BoundReport {
            lipschitz,
            lipschitz_source: source,
            eta,
            within_general_bound: self.regret <= terms.general,
            within_universal_bound: self.regret <= terms.universal_bound,
            terms,
        });
        Ok(self.bound.as_ref().expect("just set"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Regret of the online per-slot costs against the benchmark's policies,
/// both scored with the penalised objective.
pub fn regret(
    online_costs: &[f64],
    benchmark: &BenchmarkSolution,
    trace: &TrafficTrace,
    partition: &TimePartition,
    topology: &Topology,
    params: &CostParams,
) -> Result<RegretReport> {
    if online_costs.len() != trace.horizon() {
        return Err(Error::Dimension {
            context: "online cost series",
            expected: trace.horizon(),
            actual: online_costs.len(),
        });
    }
    let bench = benchmark_log(benchmark, trace, partition, topology, params)?;
    Ok(regret_from_series(online_costs, &bench.costs(), partition))
}

/// Regret between two aligned per-slot cost series.
pub fn regret_from_series(online_costs: &[f64], benchmark_costs: &[f64], partition: &TimePartition) -> RegretReport {
    debug_assert_eq!(online_costs.len(), benchmark_costs.len());
    let mut window_regret = vec![0.0; partition.zones()];
    let mut regret_rate = Vec::with_capacity(online_costs.len());
    let mut cumulative = 0.0;
    let mut online_total = 0.0;
    let mut bench_total = 0.0;
    for (idx, (o, b)) in online_costs.iter().zip(benchmark_costs).enumerate() {
        let t = idx + 1;
        online_total += o;
        bench_total += b;
        cumulative += o - b;
        regret_rate.push(cumulative / t as f64);
        let zone = partition.window_of(t).expect("slot within horizon").zone;
        window_regret[zone - 1] += o - b;
    }
    RegretReport {
        zones: partition.zones(),
        horizon: online_costs.len(),
        total_online_cost: online_total,
        total_benchmark_cost: bench_total,
        regret: online_total - bench_total,
        regret_rate,
        window_regret,
        raw_cost_regret: None,
        bound: None,
        violations_online: None,
        violations_benchmark: None,
    }
}

/// Regret on the raw alpha-fair cost, or `None` when some load of either run
/// is outside its domain (`rho >= 1` for `alpha > 0`).
pub fn raw_cost_regret(online: &RunLog, benchmark: &RunLog, params: &CostParams) -> Option<f64> {
    let total = |log: &RunLog| -> Option<f64> {
        let mut sum = 0.0;
        for s in &log.slots {
            if params.alpha > 0.0 && s.loads.iter().any(|&r| r >= 1.0) {
                return None;
            }
            sum += alpha_cost(&LoadVector(s.loads.clone()), params).ok()?;
        }
        Some(sum)
    };
    Some(total(online)? - total(benchmark)?)
}
