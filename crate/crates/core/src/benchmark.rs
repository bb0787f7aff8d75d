//! Hindsight benchmarks: one static policy per time window.
//!
//! Each window is solved offline by full-gradient exponentiated-gradient
//! descent on the window-aggregated penalised objective
//! `F(pi) = sum_{t in W_k} V(pi, lambda(t))`. The feasible set is the same
//! product of simplices the online learner plays on, so the same update
//! kernel is reused.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{
    lipschitz_bound, loads_into, marginal_cost, penalized_ap_cost, penalized_ap_slope, AssociationPolicy, CostParams, GradientMatrix,
};
use crate::error::{Error, Result};
use crate::learner::{egd_step, init_uniform};
use crate::topology::Topology;
use crate::traffic::{build_partition, TimePartition, TrafficTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "SolverConfig::default_max_iterations")]
    pub max_iterations: usize,
    /// Stop when `||pi - step(pi)||_1` falls to this value.
    #[serde(default = "SolverConfig::default_tolerance")]
    pub tolerance: f64,
    /// Fixed step; defaults to `1 / (|W_k| L_window)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl SolverConfig {
    fn default_max_iterations() -> usize {
        10_000
    }
    fn default_tolerance() -> f64 {
        1e-6
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("solver.max_iterations", "must be at least 1"));
        }
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::config("solver.tolerance", "must be finite and > 0"));
        }
        if let Some(s) = self.step {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::config("solver.step", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: Self::default_max_iterations(),
            tolerance: Self::default_tolerance(),
            step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Final fixed-point residual in `l1`.
    pub residual: f64,
    pub converged: bool,
    /// Reference step used for the residual.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSolution {
    pub policy: AssociationPolicy,
    /// `F(policy)` summed over the window.
    pub objective: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Smoothing widths tried, in order, when the cost has a slope jump at
/// `rho0` (`psi != 1`). Each stage warm-starts from the previous one.
const SMOOTHING_SCHEDULE: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Per-AP cost and slope with the slope jump at `rho0` replaced by a linear
/// ramp over `[rho0 - mu, rho0 + mu]`; `mu = 0` is the exact cost.
fn smoothed_ap(rho: f64, params: &CostParams, mu: f64) -> (f64, f64) {
    let lo = params.rho0 - mu;
    if mu == 0.0 || rho <= lo {
        return (penalized_ap_cost(rho, params), penalized_ap_slope(rho, params));
    }
    let a = marginal_cost(lo, params.alpha);
    let b = params.overload_slope();
    let base = penalized_ap_cost(lo, params);
    let x = rho - lo;
    if x < 2.0 * mu {
        (base + a * x + (b - a) / (4.0 * mu) * x * x, a + (b - a) * x / (2.0 * mu))
    } else {
        (base + (a + b) * mu + b * (x - 2.0 * mu), b)
    }
}

/// Window objective and its gradient, reusing buffers across iterations.
struct WindowObjective<'a> {
    topology: &'a Topology,
    trace: &'a TrafficTrace,
    slots: &'a [usize],
    params: &'a CostParams,
    mu: f64,
    rho: Vec<f64>,
    slope: Vec<f64>,
}

impl WindowObjective<'_> {
    fn value(&mut self, pi: &AssociationPolicy) -> f64 {
        let mut total = 0.0;
        for &t in self.slots {
            loads_into(&mut self.rho, pi, self.trace.slot(t), self.topology);
            total += self.rho.iter().map(|&r| smoothed_ap(r, self.params, self.mu).0).sum::<f64>();
        }
        total
    }

    fn value_and_gradient(&mut self, pi: &AssociationPolicy, g: &mut GradientMatrix) -> f64 {
        g.fill_zero();
        let mut total = 0.0;
        for &t in self.slots {
            let lambda = self.trace.slot(t);
            loads_into(&mut self.rho, pi, lambda, self.topology);
            for (j, &r) in self.rho.iter().enumerate() {
                let (v, s) = smoothed_ap(r, self.params, self.mu);
                total += v;
                self.slope[j] = s;
            }
            for (j, &s) in self.slope.iter().enumerate() {
                for &i in self.topology.locations_of(j) {
                    g.add_at(j, i, s * lambda[i] / self.topology.service_rate(j, i));
                }
            }
        }
        total
    }
}

const MAX_STEP_GROWTH: f64 = 1024.0;

struct Descent {
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Monotone exponentiated-gradient descent on the current objective.
///
/// Each iteration measures the fixed-point residual of the reference step,
/// then tries the current step and halves it until the objective does not
/// increase. After a success the step doubles, up to `MAX_STEP_GROWTH`
/// times the reference step.
fn descend(
    objective: &mut WindowObjective<'_>,
    pi: &mut AssociationPolicy,
    step: f64,
    tolerance: f64,
    budget: usize,
) -> Result<Descent> {
    let mut grad = GradientMatrix::zeros(pi.n_aps(), pi.n_locations());
    let mut trial_grad = grad.clone();
    let mut value = objective.value_and_gradient(pi, &mut grad);
    let mut local_step = step;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < budget {
        let reference = egd_step(pi, &grad, step)?;
        residual = pi.l1_distance(&reference);
        if residual <= tolerance {
            return Ok(Descent {
                iterations,
                residual,
                converged: true,
            });
        }
        iterations += 1;
        let mut accepted = false;
        let mut trial_step = local_step;
        while trial_step >= step * 1e-12 {
            let trial = if trial_step == step {
                reference.clone()
            } else {
                egd_step(pi, &grad, trial_step)?
            };
            let trial_value = objective.value_and_gradient(&trial, &mut trial_grad);
            if trial_value <= value + 4.0 * f64::EPSILON * value.abs() {
                *pi = trial;
                value = trial_value;
                std::mem::swap(&mut grad, &mut trial_grad);
                accepted = true;
                break;
            }
            trial_step *= 0.5;
        }
        if !accepted {
            break;
        }
        local_step = (trial_step * 2.0).min(step * MAX_STEP_GROWTH);
    }
    Ok(Descent {
        iterations,
        residual,
        converged: false,
    })
}

/// Approximately minimises the window-aggregated penalised objective over
/// the product of simplices, starting from the uniform split.
///
/// Steps that would increase the objective are retried at half the step.
/// When `psi != 1` the slope jump at `rho0` is first smoothed and the
/// smoothing is shrunk stage by stage. The iteration cap covers all stages;
/// hitting it returns the best iterate found with `converged = false`.
pub fn solve_window(
    topology: &Topology,
    trace: &TrafficTrace,
    window_slots: &[usize],
    params: &CostParams,
    solver: &SolverConfig,
) -> Result<WindowSolution> {
    solver.validate()?;
    params.validate()?;
    if window_slots.is_empty() {
        return Err(Error::config("window", "window has no slots"));
    }
    if trace.n_locations() != topology.n_locations() {
        return Err(Error::Dimension {
            context: "trace locations",
            expected: topology.n_locations(),
            actual: trace.n_locations(),
        });
    }
    for &t in window_slots {
        trace.try_slot(t)?;
    }
    let mut objective = WindowObjective {
        topology,
        trace,
        slots: window_slots,
        params,
        mu: 0.0,
        rho: vec![0.0; topology.n_aps()],
        slope: vec![0.0; topology.n_aps()],
    };
    let mut pi = init_uniform(topology);
    let lipschitz = lipschitz_bound(topology, trace.max_intensity_over(window_slots), params)?;
    if lipschitz == 0.0 {
        let value = objective.value(&pi);
        return Ok(WindowSolution {
            policy: pi,
            objective: value,
            diagnostics: SolverDiagnostics {
                iterations: 0,
                residual: 0.0,
                converged: true,
                step: 0.0,
            },
        });
    }
    let step = solver
        .step
        .unwrap_or_else(|| 1.0 / (window_slots.len() as f64 * lipschitz));

    let stages: &[f64] = if params.psi == 1.0 { &[0.0] } else { &SMOOTHING_SCHEDULE };
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut best: Option<(f64, AssociationPolicy)> = None;
    for (n, &mu) in stages.iter().enumerate() {
        let last = n + 1 == stages.len();
        objective.mu = mu;
        let tolerance = if last { solver.tolerance } else { solver.tolerance.max(mu) };
        let run = descend(&mut objective, &mut pi, step, tolerance, solver.max_iterations - iterations)?;
        iterations += run.iterations;
        residual = run.residual;
        converged = last && run.converged;
        objective.mu = 0.0;
        let exact = objective.value(&pi);
        if best.as_ref().is_none_or(|b| exact <= b.0) {
            best = Some((exact, pi.clone()));
        }
        if iterations >= solver.max_iterations {
            break;
        }
    }
    let (value, policy) = best.expect("at least one stage runs");
    Ok(WindowSolution {
        policy,
        objective: value,
        diagnostics: SolverDiagnostics {
            iterations,
            residual,
            converged,
            step,
        },
    })
}

/// Benchmark policy of one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSolution {
    pub zone: usize,
    pub window_len: usize,
    pub policy: AssociationPolicy,
    pub objective: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Per-zone benchmark policies `pi*[1..K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSolution {
    pub zones: Vec<ZoneSolution>,
}

impl BenchmarkSolution {
    pub fn zones(&self) -> usize {
        self.zones.len()
    }

    /// Solution of zone `k` (1-based).
    ///
    /// # Panics
    /// If `k` is out of range.
    pub fn zone(&self, k: usize) -> &ZoneSolution {
        &self.zones[k - 1]
    }

    pub fn total_objective(&self) -> f64 {
        self.zones.iter().map(|z| z.objective).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.zones.iter().all(|z| z.diagnostics.converged)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn solve_windows(
    topology: &Topology,
    trace: &TrafficTrace,
    windows: Vec<Vec<usize>>,
    params: &CostParams,
    solver: &SolverConfig,
) -> Result<BenchmarkSolution> {
    let zones = windows
        .into_par_iter()
        .enumerate()
        .map(|(k, slots)| {
            let sol = solve_window(topology, trace, &slots, params, solver)?;
            Ok(ZoneSolution {
                zone: k + 1,
                window_len: slots.len(),
                policy: sol.policy,
                objective: sol.objective,
                diagnostics: sol.diagnostics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkSolution { zones })
}

/// Optimal periodic static benchmark: one policy per window of `partition`.
pub fn solve_ops(
    topology: &Topology,
    trace: &TrafficTrace,
    partition: &TimePartition,
    params: &CostParams,
    solver: &SolverConfig,
) -> Result<BenchmarkSolution> {
    if partition.horizon() != trace.horizon() {
        return Err(Error::Dimension {
            context: "partition horizon",
            expected: trace.horizon(),
            actual: partition.horizon(),
        });
    }
    solve_windows(topology, trace, partition.windows(), params, solver)
}

/// Single policy for the whole horizon.
pub fn solve_static(
    topology: &Topology,
    trace: &TrafficTrace,
    params: &CostParams,
    solver: &SolverConfig,
) -> Result<BenchmarkSolution> {
    solve_windows(topology, trace, vec![(1..=trace.horizon()).collect()], params, solver)
}

/// One policy per slot.
pub fn solve_dynamic(
    topology: &Topology,
    trace: &TrafficTrace,
    params: &CostParams,
    solver: &SolverConfig,
) -> Result<BenchmarkSolution> {
    solve_windows(topology, trace, (1..=trace.horizon()).map(|t| vec![t]).collect(), params, solver)
}

/// Partition matching [`solve_static`] (`K = 1`).
pub fn static_partition(horizon: usize) -> Result<TimePartition> {
    build_partition(horizon, 1, horizon)
}

/// Partition matching [`solve_dynamic`] (`K = T`).
pub fn dynamic_partition(horizon: usize) -> Result<TimePartition> {
    build_partition(horizon, horizon, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::penalized_cost;

    #[test]
    fn zero_demand_returns_uniform() {
        let t = Topology::from_service_rates(2, 2, vec![1.0, 2.0, 3.0, 0.0]).unwrap();
        let tr = TrafficTrace::zeros(2, 1).unwrap();
        let params = CostParams::new(1.0, 0.8, 1.0).unwrap();
        let sol = solve_window(&t, &tr, &[1], &params, &SolverConfig::default()).unwrap();
        assert_eq!(sol.policy, init_uniform(&t));
        assert!(sol.diagnostics.converged);
        assert_eq!(sol.diagnostics.iterations, 0);
    }

    #[test]
    fn linear_cost_concentrates_on_faster_ap() {
        let t = Topology::from_service_rates(2, 1, vec![1.0, 2.0]).unwrap();
        let tr = TrafficTrace::from_rows(&[vec![0.5]]).unwrap();
        let params = CostParams::new(0.0, 1.0, 1.0).unwrap();
        let sol = solve_window(&t, &tr, &[1], &params, &SolverConfig::default()).unwrap();
        assert!(sol.diagnostics.converged, "{:?}", sol.diagnostics);
        assert!(sol.policy.get(1, 0) > 0.999);
        // optimum: all demand on AP 2, V = (0 - 1) + (0.25 - 1)
        assert!((sol.objective - (-1.75)).abs() < 1e-3);
    }

    #[test]
    fn symmetric_instance_reaches_symmetric_value() {
        let t = Topology::from_service_rates(2, 1, vec![2.0, 2.0]).unwrap();
        let tr = TrafficTrace::from_rows(&[vec![1.0]]).unwrap();
        let params = CostParams::new(2.0, 0.9, 1.0).unwrap();
        let sol = solve_window(&t, &tr, &[1], &params, &SolverConfig::default()).unwrap();
        // even split gives rho = 0.25 on each AP, phi = 1 / 0.75
        let analytic = 2.0 / 0.75;
        assert!((sol.objective - analytic).abs() < 1e-9);
        let v = penalized_cost(&sol.policy, &[1.0], &t, &params).unwrap();
        assert!((v - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn empty_window_rejected() {
        let t = Topology::from_service_rates(1, 1, vec![1.0]).unwrap();
        let tr = TrafficTrace::zeros(1, 2).unwrap();
        let params = CostParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(solve_window(&t, &tr, &[], &params, &SolverConfig::default()).is_err());
        assert!(solve_window(&t, &tr, &[3], &params, &SolverConfig::default()).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let t = Topology::from_service_rates(2, 1, vec![1.0, 1.001]).unwrap();
        let tr = TrafficTrace::from_rows(&[vec![1.0]]).unwrap();
        let params = CostParams::new(0.0, 1.0, 1.0).unwrap();
        let solver = SolverConfig {
            max_iterations: 3,
            ..SolverConfig::default()
        };
        let sol = solve_window(&t, &tr, &[1], &params, &solver).unwrap();
        assert!(!sol.diagnostics.converged);
        assert_eq!(sol.diagnostics.iterations, 3);
        sol.policy.validate(&t).unwrap();
    }

    #[test]
    fn static_and_dynamic_shapes() {
        let t = Topology::from_service_rates(2, 1, vec![1.0, 2.0]).unwrap();
        let tr = TrafficTrace::from_rows(&[vec![0.5], vec![0.2], vec![0.9]]).unwrap();
        let params = CostParams::new(1.0, 0.8, 1.0).unwrap();
        let s = solve_static(&t, &tr, &params, &SolverConfig::default()).unwrap();
        let d = solve_dynamic(&t, &tr, &params, &SolverConfig::default()).unwrap();
        assert_eq!(s.zones(), 1);
        assert_eq!(d.zones(), 3);
        assert_eq!(s.zone(1).window_len, 3);
        assert!(d.total_objective() <= s.total_objective() + 2e-6);
        assert_eq!(static_partition(3).unwrap().zones(), 1);
        assert_eq!(dynamic_partition(3).unwrap().zones(), 3);
    }

    #[test]
    fn smoothing_is_continuous_and_close() {
        let params = CostParams::new(1.0, 0.6, 3.0).unwrap();
        let mu = 0.01;
        for &edge in &[0.6 - mu, 0.6 + mu] {
            let (a, _) = smoothed_ap(edge - 1e-12, &params, mu);
            let (b, _) = smoothed_ap(edge + 1e-12, &params, mu);
            assert!((a - b).abs() < 1e-9);
        }
        for n in 0..200 {
            let rho = n as f64 * 0.005;
            let (v, _) = smoothed_ap(rho, &params, mu);
            let exact = penalized_ap_cost(rho, &params);
            assert!((v - exact).abs() <= params.overload_slope() * mu, "rho {rho}");
            assert_eq!(smoothed_ap(rho, &params, 0.0).0, exact);
        }
    }
}
