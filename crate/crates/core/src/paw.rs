//! PAW: push the advised vertex up to level lambda, then water-fill.
//!
//! Unweighted instances with integral advice only. Two dual solutions are
//! kept side by side, one per splitting function.

use crate::error::{Error, Result};
use crate::instance::{Allocation, ArrivalEvent, GraphInstance, FEAS_TOL};
use crate::numerics::{c_paw, r_paw, SplitKind, Splitting};
use crate::online::{drive, waterfill, OnlinePolicy};

/// Reads the advice of one arrival as "no advice" or a single vertex.
pub fn integral_advice(event: &ArrivalEvent, arrival: usize) -> Result<Option<usize>> {
    let mut chosen = None;
    for &(u, a) in &event.advice {
        if a <= FEAS_TOL {
            continue;
        }
        if (a - 1.0).abs() > FEAS_TOL || chosen.is_some() {
            return Err(Error::FractionalAdvice { arrival });
        }
        chosen = Some(u);
    }
    Ok(chosen)
}

/// Dual solution for one splitting function.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitDuals {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PawPolicy {
    split: Splitting,
    lambda: f64,
    /// Water level per offline vertex.
    pub d: Vec<f64>,
    pub robust: SplitDuals,
    pub consistent: SplitDuals,
    advised: Vec<bool>,
    arrival: usize,
}

impl PawPolicy {
    pub fn new(n_offline: usize, lambda: f64) -> Result<Self> {
        let split = Splitting::new(lambda)?;
        let duals = SplitDuals { alpha: vec![0.0; n_offline], beta: vec![] };
        Ok(Self {
            split,
            lambda: lambda.clamp(0.0, 1.0),
            d: vec![0.0; n_offline],
            robust: duals.clone(),
            consistent: duals,
            advised: vec![false; n_offline],
            arrival: 0,
        })
    }

    fn pour(&mut self, u: usize, amount: f64, beta: &mut [f64; 2]) {
        if amount <= 0.0 {
            return;
        }
        let (lo, hi) = (self.d[u], (self.d[u] + amount).min(1.0));
        let gr = self.split.integral(SplitKind::Robust, lo, hi);
        let gc = self.split.integral(SplitKind::Consistent, lo, hi);
        self.robust.alpha[u] += gr;
        self.consistent.alpha[u] += gc;
        beta[0] += (hi - lo) - gr;
        beta[1] += (hi - lo) - gc;
        self.d[u] = hi;
    }
}

impl OnlinePolicy for PawPolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        let t = self.arrival;
        self.arrival += 1;
        let advised = integral_advice(event, t)?;
        let mut x = vec![0.0; event.neighbors.len()];
        let mut beta = [0.0; 2];
        let mut budget = 1.0;
        if let Some(u) = advised {
            if std::mem::replace(&mut self.advised[u], true) {
                return Err(Error::InfeasibleAdvice { vertex: u, total: 2.0 });
            }
            if let Ok(k) = event.neighbors.binary_search(&u) {
                let tau = (self.lambda - self.d[u]).max(0.0);
                self.pour(u, tau, &mut beta);
                x[k] += tau;
                budget -= tau;
            }
        }
        let inc = waterfill(&self.d, &event.neighbors, budget);
        for (k, &u) in event.neighbors.iter().enumerate() {
            self.pour(u, inc[k], &mut beta);
            x[k] += inc[k];
        }
        self.robust.beta.push(beta[0]);
        self.consistent.beta.push(beta[1]);
        Ok(x)
    }
}

#[derive(Clone, Debug)]
pub struct PawRun {
    pub lambda: f64,
    pub allocation: Allocation,
    pub value: f64,
    pub robust: SplitDuals,
    pub consistent: SplitDuals,
}

pub fn paw_run(g: &GraphInstance, lambda: f64) -> Result<PawRun> {
    g.validate()?;
    if !g.is_unweighted() {
        return Err(Error::Weighted);
    }
    let mut policy = PawPolicy::new(g.n_offline(), lambda)?;
    let allocation = drive(&mut policy, g)?;
    let value = allocation.levels.iter().sum();
    Ok(PawRun { lambda: policy.lambda, allocation, value, robust: policy.robust, consistent: policy.consistent })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PawCertificate {
    pub alg: f64,
    /// Equality gaps for the robust and consistent dual solutions.
    pub gap_robust: f64,
    pub gap_consistent: f64,
    /// `min alpha_u + beta_v` over all edges, `g_r` duals.
    pub robust_min: f64,
    /// `min alpha_u + beta_v` over advised edges, `g_c` duals.
    pub consistency_min: f64,
    pub r_target: f64,
    pub c_target: f64,
}

impl PawCertificate {
    pub fn passes(&self, gap_rel: f64, slack: f64) -> bool {
        let scale = self.alg.max(1e-12);
        self.gap_robust <= gap_rel * scale
            && self.gap_consistent <= gap_rel * scale
            && self.robust_min >= self.r_target - slack
            && self.consistency_min >= self.c_target - slack
    }
}

pub fn certify(g: &GraphInstance, run: &PawRun) -> PawCertificate {
    let total = |d: &SplitDuals| d.alpha.iter().sum::<f64>() + d.beta.iter().sum::<f64>();
    let mut robust_min = f64::INFINITY;
    let mut consistency_min = f64::INFINITY;
    for (v, e) in g.arrivals.iter().enumerate() {
        for &u in &e.neighbors {
            robust_min = robust_min.min(run.robust.alpha[u] + run.robust.beta[v]);
        }
        for &(u, a) in &e.advice {
            if a > FEAS_TOL {
                consistency_min = consistency_min.min(run.consistent.alpha[u] + run.consistent.beta[v]);
            }
        }
    }
    PawCertificate {
        alg: run.value,
        gap_robust: (run.value - total(&run.robust)).abs(),
        gap_consistent: (run.value - total(&run.consistent)).abs(),
        robust_min,
        consistency_min,
        r_target: r_paw(run.lambda),
        c_target: c_paw(run.lambda),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pushes_advised_to_lambda_then_waterfills() {
        let g = GraphInstance::unweighted(3, vec![ArrivalEvent::new(vec![0, 1, 2], vec![(0, 1.0)])]).unwrap();
        let run = paw_run(&g, 0.4).unwrap();
        // The remaining 0.6 settles at level 0.3 < 0.4, so vertex 0 gets no more.
        assert!((run.allocation.get(0, 0) - 0.4).abs() < 1e-12);
        assert!((run.allocation.get(0, 1) - 0.3).abs() < 1e-12);
        assert!((run.allocation.get(0, 2) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_waterfilling() {
        let g = GraphInstance::unweighted(2, vec![ArrivalEvent::new(vec![0, 1], vec![(1, 1.0)])]).unwrap();
        let run = paw_run(&g, 0.0).unwrap();
        assert!((run.allocation.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_fractional_and_weighted() {
        let g = GraphInstance::unweighted(2, vec![ArrivalEvent::new(vec![0, 1], vec![(0, 0.5), (1, 0.5)])]).unwrap();
        assert!(matches!(paw_run(&g, 0.5), Err(Error::FractionalAdvice { arrival: 0 })));
        let g = GraphInstance::new(vec![2.0], vec![ArrivalEvent::new(vec![0], vec![])]).unwrap();
        assert!(matches!(paw_run(&g, 0.5), Err(Error::Weighted)));
    }

    #[test]
    fn duals_split_each_unit() {
        let g = GraphInstance::unweighted(
            2,
            vec![ArrivalEvent::new(vec![0, 1], vec![(0, 1.0)]), ArrivalEvent::new(vec![0], vec![])],
        )
        .unwrap();
        let run = paw_run(&g, 0.7).unwrap();
        let c = certify(&g, &run);
        assert!(c.gap_robust < 1e-12 && c.gap_consistent < 1e-12);
        assert!(c.passes(1e-8, 1e-6), "{c:?}");
    }
}
