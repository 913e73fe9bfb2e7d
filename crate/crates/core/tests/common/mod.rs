//! Shared helpers for the integration tests: random instances and an
//! independent step simulation of LAB's continuous process.
#![allow(dead_code)]

use matchkit::{ArrivalEvent, GraphInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdviceKind {
    None,
    Integral,
    Fractional,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bipartite instance with feasible advice of the given kind.
pub fn random_instance(
    r: &mut ChaCha8Rng,
    n_off: usize,
    n_on: usize,
    p: f64,
    weighted: bool,
    advice: AdviceKind,
) -> GraphInstance {
    let weights: Vec<f64> = (0..n_off).map(|_| if weighted { r.gen_range(0.1..3.0) } else { 1.0 }).collect();
    let mut load = vec![0.0f64; n_off];
    let mut arrivals = Vec::with_capacity(n_on);
    for _ in 0..n_on {
        let mut nb: Vec<usize> = (0..n_off).filter(|_| r.gen_bool(p)).collect();
        if nb.is_empty() && r.gen_bool(0.8) {
            nb.push(r.gen_range(0..n_off));
        }
        let mut adv = Vec::new();
        match advice {
            AdviceKind::None => {}
            AdviceKind::Integral => {
                let free: Vec<usize> = nb.iter().copied().filter(|&u| load[u] == 0.0).collect();
                if !free.is_empty() && r.gen_bool(0.85) {
                    let u = free[r.gen_range(0..free.len())];
                    load[u] = 1.0;
                    adv.push((u, 1.0));
                }
            }
            AdviceKind::Fractional => {
                let mut left = 1.0f64;
                for &u in &nb {
                    if r.gen_bool(0.5) {
                        let cap = (1.0 - load[u]).min(left);
                        let a = if r.gen_bool(0.3) { cap } else { r.gen_range(0.0..=1.0) * cap };
                        if a > 0.0 {
                            load[u] += a;
                            left -= a;
                            adv.push((u, a));
                        }
                    }
                }
            }
        }
        arrivals.push(ArrivalEvent::new(nb, adv));
    }
    GraphInstance::new(weights, arrivals).expect("generated instance is valid")
}

fn lambert_w(z: f64) -> f64 {
    // Newton on w e^w = z from a safe starting point; only used on
    // [-1/e, 0] here.
    let mut w = if z < -0.3 { -1.0 + (2.0 * (1.0 + std::f64::consts::E * z)).max(0.0).sqrt() } else { z };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let d = ew * (w + 1.0);
        if d.abs() < 1e-300 {
            break;
        }
        let next = (w - f / d).max(-1.0);
        if (next - w).abs() < 1e-16 {
            w = next;
            break;
        }
        w = next;
    }
    w
}

/// Penalty written straight from its definition.
pub fn penalty(lambda: f64, a: f64, x: f64) -> f64 {
    let f0 = |z: f64| (z + lambda - 1.0).exp().min(1.0);
    let f1 = |z: f64| {
        let knee = lambda * (1.0 - lambda).exp();
        if z >= 1.0 {
            1.0
        } else if z < knee {
            ((lambda - 1.0).exp() - lambda) / (1.0 - z)
        } else if lambda == 0.0 {
            (z - 1.0).exp()
        } else {
            (-lambda / lambert_w(-lambda * (1.0 - lambda - z).exp())).min(1.0)
        }
    };
    if a > x {
        f1(x)
    } else {
        f0(x - a).max(f1(x))
    }
}

/// Pushes each arrival's unit in steps of `h` to the neighbour of largest
/// potential `w (1 - f(A, X))`, ties to the lower level then the lower
/// index. Returns `x[v][k]` for the k-th neighbour of arrival v.
pub fn simulate_lab(g: &GraphInstance, lambda: f64, h: f64) -> Vec<Vec<f64>> {
    let n = g.n_offline();
    let mut a = vec![0.0f64; n];
    let mut x = vec![0.0f64; n];
    let mut out = Vec::with_capacity(g.n_online());
    for e in &g.arrivals {
        for &(u, adv) in &e.advice {
            a[u] += adv;
        }
        let nb = &e.neighbors;
        let mut pot: Vec<f64> = nb.iter().map(|&u| g.weights[u] * (1.0 - penalty(lambda, a[u], x[u]))).collect();
        let mut got = vec![0.0f64; nb.len()];
        let mut left = 1.0f64;
        while left > 1e-12 {
            let mut best: Option<usize> = None;
            for k in 0..nb.len() {
                if x[nb[k]] >= 1.0 - 1e-12 {
                    continue;
                }
                best = match best {
                    None => Some(k),
                    Some(b) => {
                        let better = pot[k] > pot[b] || (pot[k] == pot[b] && x[nb[k]] < x[nb[b]]);
                        Some(if better { k } else { b })
                    }
                };
            }
            let Some(k) = best else { break };
            let u = nb[k];
            let step = h.min(left).min(1.0 - x[u]);
            x[u] += step;
            got[k] += step;
            left -= step;
            pot[k] = g.weights[u] * (1.0 - penalty(lambda, a[u], x[u]));
        }
        out.push(got);
    }
    out
}
