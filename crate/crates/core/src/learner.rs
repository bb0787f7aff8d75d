//! Entropic mirror descent on a product of simplices, and the periodic
//! online learner built on it.
//!
//! With the summed entropy `h(pi) = sum_i sum_j pi_ji log pi_ji` as
//! regulariser, the mirror step has the closed form of a per-location
//! softmax, and one step of mirror descent is a normalised multiplicative
//! update of the previous policy. The learner keeps one such update chain per
//! time zone and restarts each chain from the uniform split at the first slot
//! of its window.

use serde::{Deserialize, Serialize};

use crate::cost::{
    accumulate_gradient, loads_into, penalized_cost_from_loads, AssociationPolicy, CostParams, GradientMatrix,
    LoadVector,
};
use crate::error::{Error, Result};
use crate::metrics::{RunLog, SlotRecord};
use crate::topology::Topology;
use crate::traffic::{window_of, TimePartition, TrafficTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Step size, `eta > 0`.
    pub eta: f64,
    /// Keep every emitted policy in the run log (`T * |J| * |I|` values).
    #[serde(default)]
    pub record_policies: bool,
}

impl LearnerConfig {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            record_policies: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::config("eta", format!("must be finite and > 0, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Even split of each location over its neighbour APs.
pub fn init_uniform(topology: &Topology) -> AssociationPolicy {
    let mut pi = AssociationPolicy::zeros(topology.n_aps(), topology.n_locations());
    for i in 0..topology.n_locations() {
        let aps = topology.aps_of(i);
        let share = 1.0 / aps.len() as f64;
        for &j in aps {
            pi.set(j, i, share);
        }
    }
    pi
}

/// One normalised exponentiated-gradient step,
/// `pi'_ji ∝ pi_ji exp(-eta g_ji)` column by column.
pub fn egd_step(policy: &AssociationPolicy, gradient: &GradientMatrix, eta: f64) -> Result<AssociationPolicy> {
    let mut next = policy.clone();
    egd_step_in_place(&mut next, gradient, eta)?;
    Ok(next)
}

/// In-place [`egd_step`]. Returns how many positive entries underflowed to
/// zero.
pub fn egd_step_in_place(policy: &mut AssociationPolicy, gradient: &GradientMatrix, eta: f64) -> Result<usize> {
    if gradient.n_aps() != policy.n_aps() || gradient.n_locations() != policy.n_locations() {
        return Err(Error::Dimension {
            context: "gradient vs policy",
            expected: policy.n_aps() * policy.n_locations(),
            actual: gradient.n_aps() * gradient.n_locations(),
        });
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Domain(format!("step size must be finite and >= 0, got {eta}")));
    }
    let n_aps = policy.n_aps();
    let mut underflows = 0;
    for i in 0..policy.n_locations() {
        // shift by the smallest gradient on the support so the largest factor is 1
        let mut shift = f64::INFINITY;
        for j in 0..n_aps {
            if policy.get(j, i) > 0.0 {
                shift = shift.min(gradient.get(j, i));
            }
        }
        if !shift.is_finite() {
            return Err(Error::Domain(format!("location {i} has no positive association mass")));
        }
        let mut sum = 0.0;
        for j in 0..n_aps {
            let p = policy.get(j, i);
            if p > 0.0 {
                let v = p * (-eta * (gradient.get(j, i) - shift)).exp();
                if v == 0.0 {
                    underflows += 1;
                }
                policy.set(j, i, v);
                sum += v;
            }
        }
        for j in 0..n_aps {
            let p = policy.get(j, i);
            if p > 0.0 {
                let v = p / sum;
                if v == 0.0 {
                    underflows += 1;
                }
                policy.set(j, i, v);
            }
        }
    }
    Ok(underflows)
}

/// Closed-form mirror map: `pi_ji = exp(eta theta_ji) / sum_{j' in N^i} exp(eta theta_j'i)`
/// on topology links, zero elsewhere. `theta` is row-major by AP.
pub fn mirror_map(theta: &[f64], eta: f64, topology: &Topology) -> Result<AssociationPolicy> {
    let (n_aps, n_loc) = (topology.n_aps(), topology.n_locations());
    if theta.len() != n_aps * n_loc {
        return Err(Error::Dimension {
            context: "theta matrix",
            expected: n_aps * n_loc,
            actual: theta.len(),
        });
    }
    let mut pi = AssociationPolicy::zeros(n_aps, n_loc);
    for i in 0..n_loc {
        let aps = topology.aps_of(i);
        let top = aps.iter().map(|&j| eta * theta[j * n_loc + i]).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &j in aps {
            let v = (eta * theta[j * n_loc + i] - top).exp();
            pi.set(j, i, v);
            sum += v;
        }
        for &j in aps {
            pi.set(j, i, pi.get(j, i) / sum);
        }
    }
    Ok(pi)
}

/// `sum p log p` with `0 log 0 = 0`.
pub fn neg_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum()
}

/// Summed negative entropy of all location columns; always `<= 0`.
pub fn entropy_regularizer(policy: &AssociationPolicy) -> f64 {
    neg_entropy(policy.as_slice())
}

/// State of one zone's update chain.
#[derive(Debug, Clone)]
struct ZoneState {
    policy: AssociationPolicy,
    gradient: GradientMatrix,
}

/// Per-zone state of the periodic learner: the last policy played in each
/// window and the gradient observed right after playing it.
#[derive(Debug, Clone)]
pub struct PerOneState {
    zones: Vec<Option<ZoneState>>,
}

impl PerOneState {
    fn new(zones: usize) -> Self {
        Self {
            zones: vec![None; zones],
        }
    }

    pub fn zones(&self) -> usize {
        self.zones.len()
    }

    /// Last policy played in `zone` (1-based), if the window has started.
    pub fn policy(&self, zone: usize) -> Option<&AssociationPolicy> {
        self.zones.get(zone.wrapping_sub(1))?.as_ref().map(|z| &z.policy)
    }

    /// Gradient stored for `zone` (1-based), if the window has started.
    pub fn gradient(&self, zone: usize) -> Option<&GradientMatrix> {
        self.zones.get(zone.wrapping_sub(1))?.as_ref().map(|z| &z.gradient)
    }
}

/// Periodic online exponentiated-gradient learner.
///
/// Drive it with [`decide`](Self::decide) followed by
/// [`observe`](Self::observe) for every slot in order; the decision for a
/// slot never sees that slot's demand.
#[derive(Debug)]
pub struct PerOne<'a> {
    topology: &'a Topology,
    partition: &'a TimePartition,
    params: CostParams,
    eta: f64,
    state: PerOneState,
    current: Option<(usize, usize, AssociationPolicy)>,
    next_slot: usize,
    underflows: usize,
    rho: Vec<f64>,
}

impl<'a> PerOne<'a> {
    pub fn new(topology: &'a Topology, partition: &'a TimePartition, params: CostParams, eta: f64) -> Result<Self> {
        params.validate()?;
        LearnerConfig::new(eta).validate()?;
        Ok(Self {
            topology,
            partition,
            params,
            eta,
            state: PerOneState::new(partition.zones()),
            current: None,
            next_slot: 1,
            underflows: 0,
            rho: vec![0.0; topology.n_aps()],
        })
    }

    pub fn state(&self) -> &PerOneState {
        &self.state
    }

    /// Entries that underflowed to zero so far.
    pub fn underflow_events(&self) -> usize {
        self.underflows
    }

    /// Association for slot `t`: uniform at the first slot of its window,
    /// otherwise one step from the zone's previous policy using the gradient
    /// observed at that previous slot.
    pub fn decide(&mut self, t: usize) -> Result<&AssociationPolicy> {
        if t != self.next_slot || self.current.is_some() {
            return Err(Error::Domain(format!(
                "slots must be decided then observed in order; expected slot {}",
                self.next_slot
            )));
        }
        let pos = window_of(self.partition, t)?;
        let policy = if pos.is_first {
            init_uniform(self.topology)
        } else {
            let zone = self.state.zones[pos.zone - 1]
                .take()
                .ok_or_else(|| Error::Domain(format!("zone {} has no state at slot {t}", pos.zone)))?;
            let mut policy = zone.policy;
            self.underflows += egd_step_in_place(&mut policy, &zone.gradient, self.eta)?;
            policy
        };
        self.current = Some((t, pos.zone, policy));
        Ok(&self.current.as_ref().expect("just set").2)
    }

    /// Reveals slot `t`'s demand, scores the decision and stores its
    /// gradient for the zone's next slot. Returns the slot record and the
    /// policy that was played.
    pub fn observe(&mut self, lambda: &[f64]) -> Result<(SlotRecord, AssociationPolicy)> {
        if lambda.len() != self.topology.n_locations() {
            return Err(Error::Dimension {
                context: "demand vector",
                expected: self.topology.n_locations(),
                actual: lambda.len(),
            });
        }
        let (t, zone, policy) = self
            .current
            .take()
            .ok_or_else(|| Error::Domain("observe called before decide".into()))?;
        loads_into(&mut self.rho, &policy, lambda, self.topology);
        let loads = LoadVector(self.rho.clone());
        let cost = penalized_cost_from_loads(&loads, &self.params);
        let mut gradient = GradientMatrix::zeros(self.topology.n_aps(), self.topology.n_locations());
        accumulate_gradient(&mut gradient, &self.rho, lambda, self.topology, &self.params);
        let record = SlotRecord::new(t, zone, cost, loads, self.params.rho0, gradient.inf_norm());
        self.state.zones[zone - 1] = Some(ZoneState {
            policy: policy.clone(),
            gradient,
        });
        self.next_slot += 1;
        Ok((record, policy))
    }
}

/// Runs the periodic learner over the whole trace.
pub fn run_perone(
    topology: &Topology,
    trace: &TrafficTrace,
    partition: &TimePartition,
    params: &CostParams,
    config: &LearnerConfig,
) -> Result<RunLog> {
    config.validate()?;
    if trace.n_locations() != topology.n_locations() {
        return Err(Error::Dimension {
            context: "trace locations",
            expected: topology.n_locations(),
            actual: trace.n_locations(),
        });
    }
    if partition.horizon() != trace.horizon() {
        return Err(Error::Dimension {
            context: "partition horizon",
            expected: trace.horizon(),
            actual: partition.horizon(),
        });
    }
    let mut learner = PerOne::new(topology, partition, *params, config.eta)?;
    let mut slots = Vec::with_capacity(trace.horizon());
    let mut policies = config.record_policies.then(|| Vec::with_capacity(trace.horizon()));
    for t in 1..=trace.horizon() {
        learner.decide(t)?;
        let (record, policy) = learner.observe(trace.slot(t))?;
        slots.push(record);
        if let Some(p) = policies.as_mut() {
            p.push(policy);
        }
    }
    Ok(RunLog {
        rho0: params.rho0,
        slots,
        policies,
        underflow_events: learner.underflow_events(),
    })
}
