//! Reference algorithms: balance, greedy, follow-the-advice and their mixes.

use crate::error::Result;
use crate::instance::{Allocation, ArrivalEvent, GraphInstance};
use crate::online::{drive, waterfill, OnlinePolicy};

/// Vertex-weighted water-filling with penalty `e^{X-1}`.
#[derive(Clone, Debug)]
pub struct BalancePolicy {
    weights: Vec<f64>,
    pub x: Vec<f64>,
}

impl BalancePolicy {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self { weights, x: vec![0.0; n] }
    }

    /// Increment that brings `u` down to potential `level`.
    fn fill_to(&self, u: usize, level: f64) -> f64 {
        let (w, x) = (self.weights[u], self.x[u]);
        if w <= 0.0 || level >= w {
            return 0.0;
        }
        (1.0 + (1.0 - level / w).ln() - x).clamp(0.0, 1.0 - x)
    }
}

impl OnlinePolicy for BalancePolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        let nb = &event.neighbors;
        let total = |level: f64| nb.iter().map(|&u| self.fill_to(u, level)).sum::<f64>();
        let z: Vec<f64> = if total(0.0) <= 1.0 {
            let base: Vec<f64> = nb.iter().map(|&u| self.fill_to(u, 0.0)).collect();
            let mut after = self.x.clone();
            for (&u, b) in nb.iter().zip(&base) {
                after[u] += b;
            }
            let rest = 1.0 - base.iter().sum::<f64>();
            let extra = waterfill(&after, nb, rest);
            base.iter().zip(extra).map(|(b, e)| b + e).collect()
        } else {
            let (mut lo, mut hi) = (0.0, nb.iter().map(|&u| self.weights[u]).fold(0.0, f64::max));
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if total(mid) <= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            nb.iter().map(|&u| self.fill_to(u, hi)).collect()
        };
        for (&u, dz) in nb.iter().zip(&z) {
            self.x[u] = (self.x[u] + dz).min(1.0);
        }
        Ok(z)
    }
}

/// Fill neighbours in decreasing weight (ties to the lower index).
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    weights: Vec<f64>,
    pub x: Vec<f64>,
}

impl GreedyPolicy {
    pub fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self { weights, x: vec![0.0; n] }
    }
}

impl OnlinePolicy for GreedyPolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        let nb = &event.neighbors;
        let mut order: Vec<usize> = (0..nb.len()).collect();
        order.sort_by(|&a, &b| self.weights[nb[b]].total_cmp(&self.weights[nb[a]]).then(a.cmp(&b)));
        let mut left = 1.0;
        let mut z = vec![0.0; nb.len()];
        for k in order {
            let u = nb[k];
            let take = (1.0 - self.x[u]).max(0.0).min(left);
            z[k] = take;
            self.x[u] += take;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        Ok(z)
    }
}

/// Copies the advice (clipped to the remaining capacity). With `complete`,
/// the leftover of each arrival is water-filled over its neighbours.
#[derive(Clone, Debug)]
pub struct AdvicePolicy {
    pub x: Vec<f64>,
    complete: bool,
}

impl AdvicePolicy {
    pub fn new(n_offline: usize, complete: bool) -> Self {
        Self { x: vec![0.0; n_offline], complete }
    }
}

impl OnlinePolicy for AdvicePolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        let nb = &event.neighbors;
        let mut z = vec![0.0; nb.len()];
        let mut used: f64 = 0.0;
        for &(u, a) in &event.advice {
            if let Ok(k) = nb.binary_search(&u) {
                let take = a.min((1.0 - self.x[u]).max(0.0)).min((1.0 - used).max(0.0));
                z[k] += take;
                self.x[u] += take;
                used += take;
            }
        }
        if self.complete {
            let extra = waterfill(&self.x, nb, (1.0 - used).max(0.0));
            for (k, &u) in nb.iter().enumerate() {
                z[k] += extra[k];
                self.x[u] += extra[k];
            }
        }
        Ok(z)
    }
}

/// Allocation together with its value.
#[derive(Clone, Debug)]
pub struct BaselineRun {
    pub allocation: Allocation,
    pub value: f64,
}

fn run_policy<P: OnlinePolicy>(g: &GraphInstance, mut p: P) -> Result<BaselineRun> {
    g.validate()?;
    let allocation = drive(&mut p, g)?;
    let value = allocation.value(&g.weights);
    Ok(BaselineRun { allocation, value })
}

pub fn balance_run(g: &GraphInstance) -> Result<BaselineRun> {
    run_policy(g, BalancePolicy::new(g.weights.clone()))
}

pub fn greedy_run(g: &GraphInstance) -> Result<BaselineRun> {
    run_policy(g, GreedyPolicy::new(g.weights.clone()))
}

pub fn follow_advice_run(g: &GraphInstance) -> Result<BaselineRun> {
    run_policy(g, AdvicePolicy::new(g.n_offline(), false))
}

/// Follow the advice, then water-fill what is left of each arrival.
pub fn advice_waterfill_run(g: &GraphInstance) -> Result<BaselineRun> {
    run_policy(g, AdvicePolicy::new(g.n_offline(), true))
}

/// `mix * advice + (1 - mix) * balance`, edge by edge.
pub fn coinflip_run(g: &GraphInstance, mix: f64) -> Result<BaselineRun> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(crate::Error::Parameter(format!("mix {mix} outside [0, 1]")));
    }
    let adv = follow_advice_run(g)?;
    let bal = balance_run(g)?;
    let mut allocation = Allocation::empty(g.n_offline());
    for (e, (ra, rb)) in g.arrivals.iter().zip(adv.allocation.x.iter().zip(&bal.allocation.x)) {
        let x: Vec<f64> = ra.iter().zip(rb).map(|(a, b)| mix * a.1 + (1.0 - mix) * b.1).collect();
        allocation.push(&e.neighbors, &x);
    }
    let value = allocation.value(&g.weights);
    Ok(BaselineRun { allocation, value })
}
