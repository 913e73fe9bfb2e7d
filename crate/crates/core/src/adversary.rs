//! Adaptive hard instances against robustness (`R`) and consistency (`C`).
//!
//! Both share a common phase of `n` arrivals on `2n` offline vertices. The
//! offline vertices are tracked through an explicit position array
//! `order[p] = physical id`, re-sorted by level after every step so that the
//! algorithm's behaviour decides which vertices are excluded next.
//! OPT is `2n` on both.

use crate::baselines::{AdvicePolicy, BalancePolicy};
use crate::error::{Error, Result};
use crate::instance::{Allocation, ArrivalEvent, GraphInstance};
use crate::lab::LabPolicy;
use crate::numerics::unit_grid;
use crate::online::OnlinePolicy;
use crate::par;
use crate::paw::PawPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    R,
    C,
}

/// Everything that happened in one adversary run.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub which: Which,
    pub n: usize,
    /// The realised instance, advice included, in physical ids.
    pub instance: GraphInstance,
    pub allocation: Allocation,
    /// `order` after each arrival.
    pub permutations: Vec<Vec<usize>>,
    pub alg: f64,
    pub opt: f64,
}

impl Transcript {
    pub fn ratio(&self) -> f64 {
        self.alg / self.opt
    }
}

struct Board {
    order: Vec<usize>,
    levels: Vec<f64>,
    arrivals: Vec<ArrivalEvent>,
    alloc: Allocation,
    permutations: Vec<Vec<usize>>,
}

impl Board {
    fn new(n: usize) -> Self {
        Self {
            order: (0..2 * n).collect(),
            levels: vec![0.0; 2 * n],
            arrivals: vec![],
            alloc: Allocation::empty(2 * n),
            permutations: vec![],
        }
    }

    /// Offers positions `lo..=hi` (1-based) with optional advised position.
    fn arrive<P: OnlinePolicy + ?Sized>(
        &mut self,
        policy: &mut P,
        lo: usize,
        hi: usize,
        advised: Option<usize>,
    ) -> Result<()> {
        let mut nb: Vec<usize> = (lo..=hi).map(|p| self.order[p - 1]).collect();
        nb.sort_unstable();
        let advice = advised.map(|p| vec![(self.order[p - 1], 1.0)]).unwrap_or_default();
        let event = ArrivalEvent { neighbors: nb, advice };
        let x = policy.step(&event)?;
        if x.len() != event.neighbors.len() {
            return Err(Error::Parameter("policy returned the wrong number of amounts".into()));
        }
        for (&u, &dx) in event.neighbors.iter().zip(&x) {
            self.levels[u] += dx;
        }
        self.alloc.push(&event.neighbors, &x);
        self.arrivals.push(event);
        Ok(())
    }

    /// Stable sort of positions `lo..=hi` (1-based) by level.
    fn sort(&mut self, lo: usize, hi: usize, descending: bool) {
        if lo > hi {
            return;
        }
        let levels = &self.levels;
        let seg = &mut self.order[lo - 1..hi];
        if descending {
            seg.sort_by(|&a, &b| levels[b].total_cmp(&levels[a]));
        } else {
            seg.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        }
    }

    fn snapshot(&mut self) {
        self.permutations.push(self.order.clone());
    }
}

/// Runs adversary `which` of size `n` against `policy`.
pub fn run_adversary<P: OnlinePolicy + ?Sized>(policy: &mut P, n: usize, which: Which) -> Result<Transcript> {
    if n == 0 {
        return Err(Error::Parameter("adversary size must be positive".into()));
    }
    let mut b = Board::new(n);
    for t in 1..=n {
        b.arrive(policy, t, 2 * n - t + 1, Some(t))?;
        b.sort(t + 1, 2 * n - t + 1, true);
        b.snapshot();
    }
    match which {
        Which::R => {
            b.sort(1, n, false);
            for t in n + 1..=2 * n {
                b.arrive(policy, t - n, n, None)?;
                b.sort(t - n, n, false);
                b.snapshot();
            }
        }
        Which::C => {
            for t in n + 1..=2 * n {
                b.arrive(policy, t, t, Some(t))?;
                b.snapshot();
            }
        }
    }
    let alg = b.levels.iter().sum();
    let instance = GraphInstance { weights: vec![1.0; 2 * n], arrivals: b.arrivals };
    Ok(Transcript { which, n, instance, allocation: b.alloc, permutations: b.permutations, alg, opt: 2.0 * n as f64 })
}

/// Algorithms that can face the adversaries by name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contender {
    Lab(f64),
    Paw(f64),
    Balance,
    Advice,
}

impl Contender {
    pub fn policy(&self, n_offline: usize) -> Result<Box<dyn OnlinePolicy + Send>> {
        Ok(match *self {
            Contender::Lab(l) => Box::new(LabPolicy::new(vec![1.0; n_offline], l)?),
            Contender::Paw(l) => Box::new(PawPolicy::new(n_offline, l)?),
            Contender::Balance => Box::new(BalancePolicy::new(vec![1.0; n_offline])),
            Contender::Advice => Box::new(AdvicePolicy::new(n_offline, false)),
        })
    }
}

pub fn run_contender(c: Contender, n: usize, which: Which) -> Result<Transcript> {
    let mut p = c.policy(2 * n)?;
    run_adversary(&mut p, n, which)
}

/// One row of an empirical tradeoff curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TradeoffPoint {
    pub lambda: f64,
    pub r_hat: f64,
    pub c_hat: f64,
}

/// Ratios against `R` and `C` over a grid of `k` lambdas.
pub fn empirical_tradeoff(make: fn(f64) -> Contender, k: usize, n: usize) -> Result<Vec<TradeoffPoint>> {
    let grid = unit_grid(k);
    par::map(&grid, |&lambda| -> Result<TradeoffPoint> {
        let r = run_contender(make(lambda), n, Which::R)?;
        let c = run_contender(make(lambda), n, Which::C)?;
        Ok(TradeoffPoint { lambda, r_hat: r.ratio(), c_hat: c.ratio() })
    })
    .into_iter()
    .collect()
}
