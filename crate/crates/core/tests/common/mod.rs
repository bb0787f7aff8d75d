//! Random instances shared by the integration tests.
#![allow(dead_code)]

use perone::cost::{AssociationPolicy, CostParams};
use perone::topology::Topology;
use perone::traffic::TrafficTrace;
use rand::Rng;

/// Random sparse topology; every location gets at least one link.
pub fn random_topology<R: Rng>(rng: &mut R, n_aps: usize, n_locations: usize, rate: (f64, f64)) -> Topology {
    let mut rates = vec![0.0; n_aps * n_locations];
    for i in 0..n_locations {
        let forced = rng.random_range(0..n_aps);
        for j in 0..n_aps {
            if j == forced || rng.random_bool(0.6) {
                rates[j * n_locations + i] = rng.random_range(rate.0..rate.1);
            }
        }
    }
    Topology::from_service_rates(n_aps, n_locations, rates).unwrap()
}

/// Uniform point of the `n`-simplex (normalised exponential draws).
pub fn dirichlet<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Feasible policy with Dirichlet columns on each location's neighbourhood.
pub fn random_policy<R: Rng>(rng: &mut R, topology: &Topology) -> AssociationPolicy {
    let (n_aps, n_loc) = (topology.n_aps(), topology.n_locations());
    let mut pi = vec![0.0; n_aps * n_loc];
    for i in 0..n_loc {
        let aps = topology.aps_of(i);
        for (&j, w) in aps.iter().zip(dirichlet(rng, aps.len())) {
            pi[j * n_loc + i] = w;
        }
    }
    AssociationPolicy::from_row_major(n_aps, n_loc, pi).unwrap()
}

pub fn random_demand<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

// independent evaluation of the penalised cost for the grid oracle
fn v_by_hand(alpha: f64, rho0: f64, psi: f64, rho: f64) -> f64 {
    let phi = |r: f64| {
        if alpha == 1.0 {
            -(1.0 - r).ln()
        } else {
            (1.0 - r).powf(1.0 - alpha) / (alpha - 1.0)
        }
    };
    if rho <= rho0 {
        phi(rho)
    } else {
        phi(rho0) + psi * (1.0 - rho0).powf(-alpha) * (rho - rho0)
    }
}

/// Grid search (step 1e-3 per free coordinate) over 2-AP policies.
pub fn grid_optimum(topo: &Topology, trace: &TrafficTrace, slots: &[usize], params: &CostParams) -> f64 {
    assert_eq!(topo.n_aps(), 2);
    let n = topo.n_locations();
    assert!(n <= 2);
    let free: Vec<bool> = (0..n).map(|i| topo.aps_of(i).len() == 2).collect();
    let steps = |i: usize| if i < n && free[i] { 1000 } else { 0 };
    let mut best = f64::INFINITY;
    for a in 0..=steps(0) {
        for b in 0..=steps(1) {
            let share = |i: usize, k: usize| -> f64 {
                if free[i] {
                    k as f64 / 1000.0
                } else if topo.is_link(0, i) {
                    1.0
                } else {
                    0.0
                }
            };
            let on_first = [share(0, a), if n > 1 { share(1, b) } else { 0.0 }];
            let mut total = 0.0;
            for &t in slots {
                let mut rho = [0.0; 2];
                for i in 0..n {
                    let lam = trace.get(t, i);
                    if topo.is_link(0, i) {
                        rho[0] += lam * on_first[i] / topo.service_rate(0, i);
                    }
                    if topo.is_link(1, i) {
                        rho[1] += lam * (1.0 - on_first[i]) / topo.service_rate(1, i);
                    }
                }
                total += rho.iter().map(|&r| v_by_hand(params.alpha, params.rho0, params.psi, r)).sum::<f64>();
            }
            best = best.min(total);
        }
    }
    best
}

