//! AP loads, the alpha-fair cost family and the penalised objective.
//!
//! For a policy `pi` and demand `lambda` the load of AP `j` is
//! `rho_j = sum_i lambda_i * pi_ji / (omega C_ji)`. Below the threshold
//! `rho0` each AP pays `phi_alpha(rho_j)`; above it the cost continues
//! linearly with slope `psi * phi_alpha'(rho0)`, so the objective is convex,
//! finite and Lipschitz on the whole product of simplices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Column-stochastic `n_aps x n_locations` matrix of routing fractions.
///
/// Column `i` is the distribution of location `i`'s demand over its APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationPolicy {
    n_aps: usize,
    n_locations: usize,
    /// Row-major by AP.
    pi: Vec<f64>,
}

/// Tolerance on column sums when validating a policy.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

impl AssociationPolicy {
    /// Wraps a row-major matrix without validation; see [`Self::validate`].
    pub fn from_row_major(n_aps: usize, n_locations: usize, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != n_aps * n_locations {
            return Err(Error::Dimension {
                context: "policy matrix",
                expected: n_aps * n_locations,
                actual: pi.len(),
            });
        }
        Ok(Self {
            n_aps,
            n_locations,
            pi,
        })
    }

    pub(crate) fn zeros(n_aps: usize, n_locations: usize) -> Self {
        Self {
            n_aps,
            n_locations,
            pi: vec![0.0; n_aps * n_locations],
        }
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    #[inline]
    pub fn get(&self, ap: usize, location: usize) -> f64 {
        self.pi[ap * self.n_locations + location]
    }

    #[inline]
    pub fn set(&mut self, ap: usize, location: usize, value: f64) {
        self.pi[ap * self.n_locations + location] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn column_sum(&self, location: usize) -> f64 {
        (0..self.n_aps).map(|j| self.get(j, location)).sum()
    }

    /// Checks both invariants: every column sums to one and mass sits only
    /// on topology links.
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        check_dims(self, topology)?;
        for i in 0..self.n_locations {
            let mut sum = 0.0;
            for j in 0..self.n_aps {
                let v = self.get(j, i);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("pi[{j}][{i}] = {v} outside [0, 1]")));
                }
                if v != 0.0 && !topology.is_link(j, i) {
                    return Err(Error::Domain(format!(
                        "pi[{j}][{i}] = {v} but AP {j} cannot serve location {i}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::Domain(format!("column {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// `self * weight + other * (1 - weight)`.
    pub fn mix(&self, other: &AssociationPolicy, weight: f64) -> Result<AssociationPolicy> {
        if self.pi.len() != other.pi.len() || self.n_aps != other.n_aps {
            return Err(Error::Dimension {
                context: "policy mix",
                expected: self.pi.len(),
                actual: other.pi.len(),
            });
        }
        let pi = self
            .pi
            .iter()
            .zip(&other.pi)
            .map(|(a, b)| weight * a + (1.0 - weight) * b)
            .collect();
        Ok(AssociationPolicy { pi, ..*self })
    }

    /// Entrywise `l1` distance.
    pub fn l1_distance(&self, other: &AssociationPolicy) -> f64 {
        self.pi.iter().zip(&other.pi).map(|(a, b)| (a - b).abs()).sum()
    }
}

fn check_dims(policy: &AssociationPolicy, topology: &Topology) -> Result<()> {
    if policy.n_aps != topology.n_aps() {
        return Err(Error::Dimension {
            context: "policy APs",
            expected: topology.n_aps(),
            actual: policy.n_aps,
        });
    }
    if policy.n_locations != topology.n_locations() {
        return Err(Error::Dimension {
            context: "policy locations",
            expected: topology.n_locations(),
            actual: policy.n_locations,
        });
    }
    Ok(())
}

fn check_demand(lambda: &[f64], topology: &Topology) -> Result<()> {
    if lambda.len() != topology.n_locations() {
        return Err(Error::Dimension {
            context: "demand vector",
            expected: topology.n_locations(),
            actual: lambda.len(),
        });
    }
    Ok(())
}

/// Partial derivatives of the objective with respect to each `pi_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    n_aps: usize,
    n_locations: usize,
    g: Vec<f64>,
}

impl GradientMatrix {
    pub fn zeros(n_aps: usize, n_locations: usize) -> Self {
        Self {
            n_aps,
            n_locations,
            g: vec![0.0; n_aps * n_locations],
        }
    }

    pub fn from_row_major(n_aps: usize, n_locations: usize, g: Vec<f64>) -> Result<Self> {
        if g.len() != n_aps * n_locations {
            return Err(Error::Dimension {
                context: "gradient matrix",
                expected: n_aps * n_locations,
                actual: g.len(),
            });
        }
        Ok(Self { n_aps, n_locations, g })
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    #[inline]
    pub fn get(&self, ap: usize, location: usize) -> f64 {
        self.g[ap * self.n_locations + location]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }

    /// Largest absolute entry.
    pub fn inf_norm(&self) -> f64 {
        self.g.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `<self, a - b>` over all entries.
    pub fn inner_with_difference(&self, a: &AssociationPolicy, b: &AssociationPolicy) -> f64 {
        self.g
            .iter()
            .zip(a.as_slice().iter().zip(b.as_slice()))
            .map(|(g, (x, y))| g * (x - y))
            .sum()
    }

    pub(crate) fn fill_zero(&mut self) {
        self.g.iter_mut().for_each(|v| *v = 0.0);
    }

    pub(crate) fn add_at(&mut self, ap: usize, location: usize, value: f64) {
        self.g[ap * self.n_locations + location] += value;
    }
}

/// Per-AP loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector(pub Vec<f64>);

impl LoadVector {
    /// Total system load `sum_j rho_j`.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Parameters of the penalised alpha-fair objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Fairness exponent, `alpha >= 0`.
    pub alpha: f64,
    /// Load threshold in `(0, 1]`; `1` is only allowed with `alpha = 0`.
    pub rho0: f64,
    /// Overload penalty factor, `psi > 0`.
    #[serde(default = "default_psi")]
    pub psi: f64,
}

fn default_psi() -> f64 {
    1.0
}

impl CostParams {
    pub fn new(alpha: f64, rho0: f64, psi: f64) -> Result<Self> {
        let p = Self { alpha, rho0, psi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::config("alpha", format!("must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.rho0 > 0.0 && self.rho0 <= 1.0) {
            return Err(Error::config("rho0", format!("must lie in (0, 1], got {}", self.rho0)));
        }
        if !self.psi.is_finite() || self.psi <= 0.0 {
            return Err(Error::config("psi", format!("must be finite and > 0, got {}", self.psi)));
        }
        if self.rho0 == 1.0 && self.alpha > 0.0 {
            return Err(Error::config(
                "rho0",
                "a threshold of 1 is only allowed with alpha = 0 (the gradient is unbounded otherwise)",
            ));
        }
        Ok(())
    }

    /// Slope of the linear extension above `rho0`.
    pub fn overload_slope(&self) -> f64 {
        self.psi * marginal_cost(self.rho0, self.alpha)
    }
}

/// `phi_alpha(rho)`: `(1 - rho)^(1 - alpha) / (alpha - 1)`, or
/// `-log(1 - rho)` when `alpha = 1`.
pub fn alpha_fair(rho: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        -(-rho).ln_1p()
    } else if alpha == 0.0 {
        rho - 1.0
    } else {
        (1.0 - rho).powf(1.0 - alpha) / (alpha - 1.0)
    }
}

/// `phi_alpha'(rho) = (1 - rho)^(-alpha)` for every alpha.
pub fn marginal_cost(rho: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        (1.0 - rho).powf(-alpha)
    }
}

/// Loads `rho_j = sum_{i in N_j} lambda_i pi_ji / (omega C_ji)`.
pub fn ap_load(policy: &AssociationPolicy, lambda: &[f64], topology: &Topology) -> Result<LoadVector> {
    check_dims(policy, topology)?;
    check_demand(lambda, topology)?;
    Ok(loads_unchecked(policy, lambda, topology))
}

pub(crate) fn loads_unchecked(policy: &AssociationPolicy, lambda: &[f64], topology: &Topology) -> LoadVector {
    let mut rho = vec![0.0; topology.n_aps()];
    loads_into(&mut rho, policy, lambda, topology);
    LoadVector(rho)
}

pub(crate) fn loads_into(rho: &mut [f64], policy: &AssociationPolicy, lambda: &[f64], topology: &Topology) {
    for (j, r) in rho.iter_mut().enumerate() {
        *r = topology
            .locations_of(j)
            .iter()
            .map(|&i| lambda[i] * policy.get(j, i) / topology.service_rate(j, i))
            .sum();
    }
}

/// Raw alpha-fair cost `sum_j phi_alpha(rho_j)`.
///
/// Fails when a load leaves the domain of `phi_alpha`; use
/// [`penalized_cost`] for a cost defined at every load.
pub fn alpha_cost(loads: &LoadVector, params: &CostParams) -> Result<f64> {
    let alpha = params.alpha;
    let mut total = 0.0;
    for (j, &rho) in loads.0.iter().enumerate() {
        let out_of_domain = if alpha >= 1.0 {
            rho >= 1.0
        } else {
            alpha > 0.0 && rho > 1.0
        };
        if out_of_domain {
            return Err(Error::Domain(format!(
                "load {rho} of AP {j} is outside the domain of the alpha = {alpha} cost; use penalized_cost"
            )));
        }
        total += alpha_fair(rho, alpha);
    }
    Ok(total)
}

/// Total system load, the human-facing reading of the `alpha = 0` cost.
pub fn total_load(loads: &LoadVector) -> f64 {
    loads.total()
}

/// Per-AP penalised cost `V_j(rho_j)`.
pub fn penalized_ap_cost(rho: f64, params: &CostParams) -> f64 {
    if rho <= params.rho0 {
        alpha_fair(rho, params.alpha)
    } else {
        alpha_fair(params.rho0, params.alpha) + params.overload_slope() * (rho - params.rho0)
    }
}

/// `dV_j / drho_j`; at `rho_j = rho0` the interior branch is used.
pub fn penalized_ap_slope(rho: f64, params: &CostParams) -> f64 {
    if rho <= params.rho0 {
        marginal_cost(rho, params.alpha)
    } else {
        params.overload_slope()
    }
}

pub fn penalized_cost_from_loads(loads: &LoadVector, params: &CostParams) -> f64 {
    loads.0.iter().map(|&rho| penalized_ap_cost(rho, params)).sum()
}

/// Penalised objective `V(pi, lambda) = sum_j V_j(rho_j)`.
pub fn penalized_cost(
    policy: &AssociationPolicy,
    lambda: &[f64],
    topology: &Topology,
    params: &CostParams,
) -> Result<f64> {
    let loads = ap_load(policy, lambda, topology)?;
    Ok(penalized_cost_from_loads(&loads, params))
}

/// Exact gradient of [`penalized_cost`]:
/// `g_ji = V_j'(rho_j) * lambda_i / (omega C_ji)` on links, zero elsewhere.
pub fn grad_penalized_cost(
    policy: &AssociationPolicy,
    lambda: &[f64],
    topology: &Topology,
    params: &CostParams,
) -> Result<GradientMatrix> {
    let loads = ap_load(policy, lambda, topology)?;
    let mut g = GradientMatrix::zeros(topology.n_aps(), topology.n_locations());
    accumulate_gradient(&mut g, &loads.0, lambda, topology, params);
    Ok(g)
}

/// Adds the gradient at the given loads into `g` (not cleared first).
pub(crate) fn accumulate_gradient(
    g: &mut GradientMatrix,
    rho: &[f64],
    lambda: &[f64],
    topology: &Topology,
    params: &CostParams,
) {
    for (j, &r) in rho.iter().enumerate() {
        let slope = penalized_ap_slope(r, params);
        for &i in topology.locations_of(j) {
            g.add_at(j, i, slope * lambda[i] / topology.service_rate(j, i));
        }
    }
}

/// Upper bound on `|g_ji|` for any policy and any demand up to `lambda_max`:
/// `max(1, psi) (1 - rho0)^(-alpha) lambda_max / min_link(omega C_ji)`.
pub fn lipschitz_bound(topology: &Topology, lambda_max: f64, params: &CostParams) -> Result<f64> {
    if !lambda_max.is_finite() || lambda_max < 0.0 {
        return Err(Error::Domain(format!("lambda_max must be finite and >= 0, got {lambda_max}")));
    }
    if params.rho0 >= 1.0 && params.alpha > 0.0 {
        return Err(Error::Domain(
            "gradient is unbounded for rho0 = 1 with alpha > 0; choose rho0 < 1".into(),
        ));
    }
    Ok(params.psi.max(1.0) * marginal_cost(params.rho0, params.alpha) * lambda_max / topology.min_service_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_ap_one_location(rate: f64) -> Topology {
        Topology::from_service_rates(2, 1, vec![rate, rate]).unwrap()
    }

    #[test]
    fn zero_demand_zero_load() {
        let t = two_ap_one_location(2.0);
        let p = AssociationPolicy::from_row_major(2, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(ap_load(&p, &[0.0], &t).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn split_load() {
        let t = two_ap_one_location(2.0);
        let p = AssociationPolicy::from_row_major(2, 1, vec![0.5, 0.5]).unwrap();
        assert_eq!(ap_load(&p, &[1.0], &t).unwrap().0, vec![0.25, 0.25]);
    }

    #[test]
    fn single_ap_two_locations() {
        let t = Topology::from_service_rates(1, 2, vec![4.0, 8.0]).unwrap();
        let p = AssociationPolicy::from_row_major(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(ap_load(&p, &[2.0, 4.0], &t).unwrap().0, vec![1.0]);
    }

    #[test]
    fn load_dimension_mismatch() {
        let t = two_ap_one_location(2.0);
        let p = AssociationPolicy::from_row_major(2, 1, vec![0.5, 0.5]).unwrap();
        assert!(matches!(ap_load(&p, &[1.0, 2.0], &t), Err(Error::Dimension { .. })));
        let q = AssociationPolicy::from_row_major(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(ap_load(&q, &[1.0], &t).is_err());
    }

    #[test]
    fn alpha_cost_values() {
        let p1 = CostParams::new(1.0, 0.9, 1.0).unwrap();
        assert_eq!(alpha_cost(&LoadVector(vec![0.0]), &p1).unwrap(), 0.0);
        let p2 = CostParams::new(2.0, 0.9, 1.0).unwrap();
        assert!((alpha_cost(&LoadVector(vec![0.5]), &p2).unwrap() - 2.0).abs() < 1e-15);
        let p0 = CostParams::new(0.0, 1.0, 1.0).unwrap();
        let loads = LoadVector(vec![0.25, 0.25]);
        assert_eq!(total_load(&loads), 0.5);
        // literal alpha = 0 formula carries a -1 per AP
        assert!((alpha_cost(&loads, &p0).unwrap() - (0.5 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn alpha_cost_domain() {
        let p = CostParams::new(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(alpha_cost(&LoadVector(vec![1.0]), &p), Err(Error::Domain(_))));
        let p = CostParams::new(2.0, 0.5, 1.0).unwrap();
        assert!(alpha_cost(&LoadVector(vec![0.2, 1.3]), &p).is_err());
        let p = CostParams::new(0.0, 0.5, 1.0).unwrap();
        assert!(alpha_cost(&LoadVector(vec![3.0]), &p).is_ok());
    }

    #[test]
    fn penalized_cost_values() {
        let t = Topology::from_service_rates(1, 1, vec![1.0]).unwrap();
        let p = AssociationPolicy::from_row_major(1, 1, vec![1.0]).unwrap();

        let params = CostParams::new(2.0, 0.5, 1.0).unwrap();
        let v = penalized_cost(&p, &[0.6], &t, &params).unwrap();
        assert!((v - 2.4).abs() < 1e-12, "{v}");

        let params = CostParams::new(1.0, 0.5, 1.0).unwrap();
        let v = penalized_cost(&p, &[0.75], &t, &params).unwrap();
        assert!((v - (2f64.ln() + 0.5)).abs() < 1e-12, "{v}");
        assert!((v - 1.1931).abs() < 1e-4);

        let params = CostParams::new(2.0, 0.8, 3.0).unwrap();
        let v = penalized_cost(&p, &[0.3], &t, &params).unwrap();
        assert_eq!(v, alpha_cost(&LoadVector(vec![0.3]), &params).unwrap());
    }

    #[test]
    fn penalized_cost_continuous_at_threshold() {
        for alpha in [0.0, 0.5, 1.0, 2.0, 3.5] {
            let params = CostParams::new(alpha, 0.7, 2.5).unwrap();
            let below = penalized_ap_cost(0.7, &params);
            let above = penalized_ap_cost(0.7 + 1e-12, &params);
            assert!((below - above).abs() < 1e-9, "alpha {alpha}");
        }
    }

    #[test]
    fn gradient_off_support_and_alpha_zero() {
        let t = Topology::from_service_rates(2, 2, vec![2.0, 0.0, 2.0, 5.0]).unwrap();
        let p = AssociationPolicy::from_row_major(2, 2, vec![0.5, 0.0, 0.5, 1.0]).unwrap();
        let params = CostParams::new(0.0, 1.0, 1.0).unwrap();
        let g = grad_penalized_cost(&p, &[1.0, 1.0], &t, &params).unwrap();
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(0, 0), 0.5);
        assert_eq!(g.get(1, 0), 0.5);
        assert_eq!(g.get(1, 1), 0.2);
    }

    #[test]
    fn lipschitz_values() {
        let t = Topology::from_service_rates(2, 1, vec![2.0, 3.0]).unwrap();
        let p0 = CostParams::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(lipschitz_bound(&t, 0.0, &p0).unwrap(), 0.0);
        assert_eq!(lipschitz_bound(&t, 1.0, &p0).unwrap(), 0.5);
        let t1 = Topology::from_service_rates(1, 1, vec![1.0]).unwrap();
        let p2 = CostParams::new(2.0, 0.5, 1.0).unwrap();
        assert_eq!(lipschitz_bound(&t1, 1.0, &p2).unwrap(), 4.0);
        let bad = CostParams { alpha: 1.0, rho0: 1.0, psi: 1.0 };
        assert!(matches!(lipschitz_bound(&t1, 1.0, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn params_validation() {
        assert!(CostParams::new(-0.1, 0.5, 1.0).is_err());
        assert!(CostParams::new(1.0, 0.0, 1.0).is_err());
        assert!(CostParams::new(1.0, 1.1, 1.0).is_err());
        assert!(CostParams::new(1.0, 0.5, 0.0).is_err());
        assert!(CostParams::new(1.0, 1.0, 1.0).is_err());
        assert!(CostParams::new(0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn policy_validation() {
        let t = Topology::from_service_rates(2, 2, vec![2.0, 0.0, 2.0, 5.0]).unwrap();
        let ok = AssociationPolicy::from_row_major(2, 2, vec![0.3, 0.0, 0.7, 1.0]).unwrap();
        assert!(ok.validate(&t).is_ok());
        let off_support = AssociationPolicy::from_row_major(2, 2, vec![0.3, 0.1, 0.7, 0.9]).unwrap();
        assert!(off_support.validate(&t).is_err());
        let bad_sum = AssociationPolicy::from_row_major(2, 2, vec![0.3, 0.0, 0.6, 1.0]).unwrap();
        assert!(bad_sum.validate(&t).is_err());
    }
}
