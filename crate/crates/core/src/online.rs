//! The interface shared by every online algorithm.

use crate::error::Result;
use crate::instance::{Allocation, ArrivalEvent, GraphInstance};

/// An online fractional matching algorithm. It sees one arrival at a time and
/// returns the amounts assigned to `event.neighbors`, in the same order.
pub trait OnlinePolicy {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>>;
}

impl<P: OnlinePolicy + ?Sized> OnlinePolicy for Box<P> {
    fn step(&mut self, event: &ArrivalEvent) -> Result<Vec<f64>> {
        (**self).step(event)
    }
}

/// Feeds every arrival of `g` to `policy`.
pub fn drive<P: OnlinePolicy + ?Sized>(policy: &mut P, g: &GraphInstance) -> Result<Allocation> {
    let mut alloc = Allocation::empty(g.n_offline());
    for event in &g.arrivals {
        let x = policy.step(event)?;
        alloc.push(&event.neighbors, &x);
    }
    Ok(alloc)
}

/// Fills `amount` of water into `levels[idx]` so the lowest rise together,
/// capped at 1. Returns the increments, aligned with `idx`.
pub fn waterfill(levels: &[f64], idx: &[usize], amount: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..idx.len()).collect();
    order.sort_by(|&a, &b| levels[idx[a]].total_cmp(&levels[idx[b]]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&k| levels[idx[k]].min(1.0)).collect();
    let mut level = 1.0;
    let mut prefix = 0.0;
    for j in 0..sorted.len() {
        prefix += sorted[j];
        let cand = (amount + prefix) / (j + 1) as f64;
        if j + 1 == sorted.len() || cand <= sorted[j + 1] {
            level = cand.min(1.0);
            break;
        }
    }
    idx.iter().map(|&u| (level - levels[u]).max(0.0)).collect()
}
