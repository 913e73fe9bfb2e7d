//! LAB: water-level allocation with the advice-aware penalty `f(A, X)`.
//!
//! Each arrival first adds its advice to `A`, then pours one unit of water
//! into the neighbours with the highest potential `w (1 - f(A, X))` until the
//! potentials meet at a common level or every neighbour is full.

use crate::error::{Error, Result};
use crate::instance::{Allocation, ArrivalEvent, GraphInstance, FEAS_TOL};
use crate::numerics::{c_lab, r_lab, Penalty};
use crate::online::{drive, OnlinePolicy};

/// How the per-vertex level inversion is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Inversion {
    /// Closed-form inverse of the potential.
    #[default]
    Closed,
    /// Bisection to 1e-12; slow, kept as a reference.
    Bisection,
}

/// One neighbour as seen by the level search. Water enters in units of
/// `level`; one unit of level costs `scale` units of the arriving vertex.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Slot {
    pub weight: f64,
    pub a: f64,
    pub x: f64,
    pub scale: f64,
}

fn invert(p: &Penalty, s: &Slot, level: f64, how: Inversion) -> f64 {
    match how {
        Inversion::Closed => p.invert_level_closed(s.weight, s.a, s.x, level),
        Inversion::Bisection => p.invert_level(s.weight, s.a, s.x, level),
    }
}

/// Level increments for each slot so that `sum scale * z = 1`, unless every
/// slot fills up first.
pub(crate) fn solve_level(slots: &[Slot], p: &Penalty, how: Inversion) -> Vec<f64> {
    if slots.is_empty() {
        return vec![];
    }
    let at = |level: f64| -> (Vec<f64>, f64) {
        let z: Vec<f64> = slots.iter().map(|s| invert(p, s, level, how)).collect();
        let total = z.iter().zip(slots).map(|(z, s)| z * s.scale).sum();
        (z, total)
    };
    let (z0, s0) = at(0.0);
    if s0 <= 1.0 {
        // Every potential can be driven to zero: the rest is a tie, broken by
        // filling the least-filled neighbours first.
        let levels: Vec<f64> = slots.iter().zip(&z0).map(|(s, z)| s.x + z).collect();
        let scales: Vec<f64> = slots.iter().map(|s| s.scale).collect();
        let extra = waterfill_scaled(&levels, &scales, 1.0 - s0);
        return z0.iter().zip(extra).map(|(a, b)| a + b).collect();
    }
    let mut lo = 0.0;
    let mut hi = slots.iter().map(|s| s.weight).fold(0.0, f64::max);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if at(mid).1 <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (zh, sh) = at(hi);
    let (zl, sl) = at(lo);
    let theta = if sl > sh { ((1.0 - sh) / (sl - sh)).clamp(0.0, 1.0) } else { 0.0 };
    zh.iter().zip(&zl).map(|(h, l)| h + theta * (l - h)).collect()
}

/// Raises `levels` (capped at 1) from the bottom so that
/// `sum scale * increment = amount`, or fills everything if that is less.
pub(crate) fn waterfill_scaled(levels: &[f64], scales: &[f64], amount: f64) -> Vec<f64> {
    let k = levels.len();
    let room: f64 = levels.iter().zip(scales).map(|(l, s)| s * (1.0 - l).max(0.0)).sum();
    if amount <= 0.0 {
        return vec![0.0; k];
    }
    if room <= amount {
        return levels.iter().map(|l| (1.0 - l).max(0.0)).collect();
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]).then(a.cmp(&b)));
    let (mut slope, mut weighted) = (0.0, 0.0);
    let mut target = 1.0;
    for (j, &i) in order.iter().enumerate() {
        slope += scales[i];
        weighted += scales[i] * levels[i];
        if slope <= 0.0 {
            continue;
        }
        let cand = (amount + weighted) / slope;
        let next = order.get(j + 1).map_or(1.0, |&n| levels[n]);
        if cand <= next {
            target = cand.min(1.0);
            break;
        }
    }
    levels.iter().map(|l| (target - l).max(0.0)).collect()
}

/// LAB as an online policy. Keeps the dual solution as it goes.
#[derive(Clone, Debug)]
pub struct LabPolicy {
    penalty: Penalty,
    weights: Vec<f64>,
    inversion: Inversion,
    /// Advice received so far, per offline vertex.
    pub a: Vec<f64>,
    /// Water level per offline vertex.
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LabPolicy {
    pub fn new(weights: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::with_inversion(weights, lambda, Inversion::default())
    }

    pub fn with_inversion(weights: Vec<f64>, lambda: f64, inversion: Inversion) -> Result<Self> {
        let n = weights.len();
        Ok(Self {
            penalty: Penalty::new(lambda)?,
            weights,
            inversion,
            a: vec![0.0; n],
            x: vec![0.0; n],
            alpha: vec![0.0; n],
            beta: vec![],
        })
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn potential(&self, u: usize) -> f64 {
        self.weights[u] * (1.0 - self.penalty.f(self.a[u].min(1.0), self.x[u]))
    }
}

impl OnlinePolicy for LabPolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        for &(u, a) in &event.advice {
            self.a[u] += a;
            if self.a[u] > 1.0 + FEAS_TOL {
                return Err(Error::InfeasibleAdvice { vertex: u, total: self.a[u] });
            }
        }
        let slots: Vec<Slot> = event
            .neighbors
            .iter()
            .map(|&u| Slot { weight: self.weights[u], a: self.a[u].min(1.0), x: self.x[u], scale: 1.0 })
            .collect();
        let z = solve_level(&slots, &self.penalty, self.inversion);
        for (&u, &dz) in event.neighbors.iter().zip(&z) {
            self.x[u] = (self.x[u] + dz).min(1.0);
        }
        let total: f64 = z.iter().sum();
        let beta = if total >= 1.0 - FEAS_TOL {
            event.neighbors.iter().map(|&u| self.potential(u)).fold(0.0, f64::max)
        } else {
            0.0
        };
        for (&u, &dz) in event.neighbors.iter().zip(&z) {
            self.alpha[u] += dz * (self.weights[u] - beta);
        }
        self.beta.push(beta);
        Ok(z)
    }
}

/// Output of a LAB run, including the dual solution.
#[derive(Clone, Debug)]
pub struct LabRun {
    pub lambda: f64,
    pub allocation: Allocation,
    pub value: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Final advice totals per offline vertex.
    pub advice_load: Vec<f64>,
}

pub fn lab_run(g: &GraphInstance, lambda: f64) -> Result<LabRun> {
    lab_run_with(g, lambda, Inversion::default())
}

pub fn lab_run_with(g: &GraphInstance, lambda: f64, inversion: Inversion) -> Result<LabRun> {
    g.validate()?;
    g.check_advice_feasible()?;
    let mut policy = LabPolicy::with_inversion(g.weights.clone(), lambda, inversion)?;
    let allocation = drive(&mut policy, g)?;
    let value = allocation.value(&g.weights);
    Ok(LabRun {
        lambda: policy.penalty.lambda(),
        allocation,
        value,
        alpha: policy.alpha,
        beta: policy.beta,
        advice_load: policy.a,
    })
}

/// Outcome of checking a run's dual solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub alg: f64,
    pub dual: f64,
    /// `|ALG - sum alpha - sum beta|`.
    pub gap: f64,
    /// Smallest normalised edge slack; should be at least `r_target`.
    pub robust_min: f64,
    /// Smallest normalised advice slack; `+inf` when no vertex was advised.
    pub consistency_min: f64,
    pub r_target: f64,
    pub c_target: f64,
}

impl Certificate {
    /// Checks at the given slack (gap relative to ALG, bounds absolute).
    pub fn passes(&self, gap_rel: f64, slack: f64) -> bool {
        self.gap <= gap_rel * self.alg.max(1e-12)
            && self.robust_min >= self.r_target - slack
            && self.consistency_min >= self.c_target - slack
    }
}

pub fn certify(g: &GraphInstance, run: &LabRun) -> Certificate {
    let dual = run.alpha.iter().sum::<f64>() + run.beta.iter().sum::<f64>();
    let mut robust_min = f64::INFINITY;
    let mut credit = run.alpha.clone();
    for (v, e) in g.arrivals.iter().enumerate() {
        for &u in &e.neighbors {
            if g.weights[u] > 0.0 {
                robust_min = robust_min.min((run.alpha[u] + run.beta[v]) / g.weights[u]);
            }
        }
        for &(u, a) in &e.advice {
            credit[u] += a * run.beta[v];
        }
    }
    let mut consistency_min = f64::INFINITY;
    for (u, &a) in run.advice_load.iter().enumerate() {
        if a > 0.0 && g.weights[u] > 0.0 {
            consistency_min = consistency_min.min(credit[u] / (g.weights[u] * a));
        }
    }
    Certificate {
        alg: run.value,
        dual,
        gap: (run.value - dual).abs(),
        robust_min,
        consistency_min,
        r_target: r_lab(run.lambda),
        c_target: c_lab(run.lambda),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_arrival(weights: Vec<f64>, nb: Vec<usize>, advice: Vec<(usize, f64)>) -> GraphInstance {
        GraphInstance::new(weights, vec![ArrivalEvent::new(nb, advice)]).unwrap()
    }

    #[test]
    fn balance_split_at_lambda_zero() {
        let g = one_arrival(vec![1.0, 1.0], vec![0, 1], vec![(0, 1.0)]);
        let run = lab_run(&g, 0.0).unwrap();
        assert!((run.allocation.get(0, 0) - 0.5).abs() < 1e-9);
        assert!((run.allocation.get(0, 1) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn follows_integral_advice_at_lambda_one() {
        let g = one_arrival(vec![1.0, 1.0], vec![0, 1], vec![(0, 1.0)]);
        let run = lab_run(&g, 1.0).unwrap();
        assert!((run.allocation.get(0, 0) - 1.0).abs() < 1e-9);
        assert!(run.allocation.get(0, 1).abs() < 1e-9);
    }

    #[test]
    fn single_neighbour_saturates() {
        let g = one_arrival(vec![1.0], vec![0], vec![]);
        let run = lab_run(&g, 0.3).unwrap();
        assert!((run.allocation.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_potential_tie_goes_to_least_filled() {
        // lambda = 1 without advice: every potential is 0 from the start.
        let g = GraphInstance::unweighted(
            2,
            vec![ArrivalEvent::new(vec![0], vec![]), ArrivalEvent::new(vec![0, 1], vec![])],
        )
        .unwrap();
        let run = lab_run(&g, 1.0).unwrap();
        assert!((run.allocation.levels[0] - 1.0).abs() < 1e-12);
        assert!((run.allocation.get(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_advice_is_rejected() {
        let g = GraphInstance::unweighted(
            1,
            vec![ArrivalEvent::new(vec![0], vec![(0, 0.7)]), ArrivalEvent::new(vec![0], vec![(0, 0.7)])],
        )
        .unwrap();
        assert!(matches!(lab_run(&g, 0.5), Err(Error::InfeasibleAdvice { vertex: 0, .. })));
    }

    #[test]
    fn waterfill_scaled_rates() {
        let inc = waterfill_scaled(&[0.0, 0.0], &[1.0, 3.0], 2.0);
        // both rise to L with L + 3L = 2
        assert!((inc[0] - 0.5).abs() < 1e-12 && (inc[1] - 0.5).abs() < 1e-12);
        let inc = waterfill_scaled(&[0.2, 0.9], &[1.0, 1.0], 10.0);
        assert!((inc[0] - 0.8).abs() < 1e-12 && (inc[1] - 0.1).abs() < 1e-12);
    }
}
