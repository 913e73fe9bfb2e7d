//! Offline tooling: exact optimum, instance generators, noisy predictions,
//! advice generation and real-graph ingest.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{ArrivalEvent, GraphInstance};

/// A maximum-weight integral matching: `partner[v]` for each arrival.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub value: f64,
    pub partner: Vec<Option<usize>>,
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    cap: i32,
    cost: f64,
    rev: usize,
}

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// OPT by successive shortest augmenting paths with node potentials.
pub fn opt_matching(g: &GraphInstance) -> Matching {
    let (m, n) = (g.n_online(), g.n_offline());
    let (src, sink) = (0, m + n + 1);
    let online = |v: usize| 1 + v;
    let offline = |u: usize| 1 + m + u;
    let mut graph: Vec<Vec<Arc>> = vec![Vec::new(); m + n + 2];
    let add = |graph: &mut Vec<Vec<Arc>>, a: usize, b: usize, cost: f64| {
        let (ra, rb) = (graph[b].len(), graph[a].len());
        graph[a].push(Arc { to: b, cap: 1, cost, rev: ra });
        graph[b].push(Arc { to: a, cap: 0, cost: -cost, rev: rb });
    };
    let mut pot = vec![0.0; m + n + 2];
    for (v, e) in g.arrivals.iter().enumerate() {
        add(&mut graph, src, online(v), 0.0);
        for &u in &e.neighbors {
            if g.weights[u] > 0.0 {
                add(&mut graph, online(v), offline(u), -g.weights[u]);
                pot[offline(u)] = -g.weights[u];
            }
        }
    }
    for u in 0..n {
        add(&mut graph, offline(u), sink, 0.0);
    }
    pot[sink] = (0..n).map(|u| pot[offline(u)]).fold(0.0, f64::min);

    let total = graph.len();
    loop {
        let mut dist = vec![f64::INFINITY; total];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Entry(0.0, src));
        while let Some(Entry(d, a)) = heap.pop() {
            if d > dist[a] {
                continue;
            }
            for (k, arc) in graph[a].iter().enumerate() {
                if arc.cap <= 0 {
                    continue;
                }
                let nd = d + (arc.cost + pot[a] - pot[arc.to]).max(0.0);
                if nd < dist[arc.to] {
                    dist[arc.to] = nd;
                    prev[arc.to] = Some((a, k));
                    heap.push(Entry(nd, arc.to));
                }
            }
        }
        if !dist[sink].is_finite() || dist[sink] + pot[sink] - pot[src] >= -1e-12 {
            break;
        }
        for (p, d) in pot.iter_mut().zip(&dist) {
            if d.is_finite() {
                *p += d;
            }
        }
        let mut b = sink;
        while let Some((a, k)) = prev[b] {
            graph[a][k].cap -= 1;
            let r = graph[a][k].rev;
            graph[b][r].cap += 1;
            b = a;
        }
    }
    let mut partner = vec![None; m];
    let mut value = 0.0;
    for v in 0..m {
        for arc in &graph[online(v)] {
            if arc.to > m && arc.to <= m + n && arc.cap == 0 && arc.cost < 0.0 {
                let u = arc.to - 1 - m;
                partner[v] = Some(u);
                value += g.weights[u];
            }
        }
    }
    Matching { value, partner }
}

/// Exhaustive search over all integral matchings; only for tiny instances.
pub fn brute_force_opt(g: &GraphInstance) -> f64 {
    fn go(g: &GraphInstance, v: usize, used: &mut Vec<bool>) -> f64 {
        if v == g.n_online() {
            return 0.0;
        }
        let mut best = go(g, v + 1, used);
        for &u in &g.arrivals[v].neighbors {
            if !used[u] {
                used[u] = true;
                best = best.max(g.weights[u] + go(g, v + 1, used));
                used[u] = false;
            }
        }
        best
    }
    go(g, 0, &mut vec![false; g.n_offline()])
}

/// Max-weight matching on the offline side by the matroid greedy rule: take
/// offline vertices by decreasing weight and keep each one that can still be
/// matched by an augmenting path. `adj[v]` lists the neighbours of online `v`.
pub fn greedy_matroid_matching(weights: &[f64], adj: &[&[usize]], available: &[bool]) -> Vec<Option<usize>> {
    let n = weights.len();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut live = 0;
    for (v, nb) in adj.iter().enumerate() {
        let mut any = false;
        for &u in nb.iter() {
            if available[u] {
                rev[u].push(v);
                any = true;
            }
        }
        live += any as usize;
    }
    let mut order: Vec<usize> = (0..n).filter(|&u| available[u] && weights[u] > 0.0 && !rev[u].is_empty()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));

    let mut mate_of_online: Vec<Option<usize>> = vec![None; adj.len()];
    let mut seen = vec![0u32; adj.len()];
    let mut stamp = 0u32;
    let mut matched = 0;

    fn augment(u: usize, rev: &[Vec<usize>], mate: &mut [Option<usize>], seen: &mut [u32], stamp: u32) -> bool {
        for &v in &rev[u] {
            if seen[v] == stamp {
                continue;
            }
            seen[v] = stamp;
            if mate[v].map_or(true, |w| augment(w, rev, mate, seen, stamp)) {
                mate[v] = Some(u);
                return true;
            }
        }
        false
    }

    for u in order {
        if matched == live {
            break;
        }
        stamp += 1;
        if augment(u, &rev, &mut mate_of_online, &mut seen, stamp) {
            matched += 1;
        }
    }
    mate_of_online
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weights(n: usize, weighted: bool, r: &mut ChaCha8Rng) -> Vec<f64> {
    if weighted {
        (0..n).map(|_| r.gen_range(0.0..1000.0)).collect()
    } else {
        vec![1.0; n]
    }
}

/// Erdos-Renyi bipartite graph: `n` offline, `n` online, each edge w.p. `p`.
pub fn gen_er(n: usize, p: f64, weighted: bool, seed: u64) -> Result<GraphInstance> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut r = rng(seed);
    let w = weights(n, weighted, &mut r);
    let arrivals = (0..n).map(|_| ArrivalEvent::new((0..n).filter(|_| r.gen_bool(p)).collect(), vec![])).collect();
    GraphInstance::new(w, arrivals)
}

/// Upper-triangular graph: online `i` (from 0) sees offline `i..n`.
pub fn gen_ut(n: usize, weighted: bool, seed: u64) -> Result<GraphInstance> {
    let mut r = rng(seed);
    let w = weights(n, weighted, &mut r);
    let arrivals = (0..n).map(|i| ArrivalEvent::new((i..n).collect(), vec![])).collect();
    GraphInstance::new(w, arrivals)
}

/// Noisy prediction of each neighbourhood: keep `round((1-gamma) deg)` true
/// neighbours and add `round(gamma * (n - deg))` non-neighbours, both
/// uniformly at random.
pub fn perturb_graph(g: &GraphInstance, gamma: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Parameter(format!("gamma {gamma} outside [0, 1]")));
    }
    let n = g.n_offline();
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(g.n_online());
    for e in &g.arrivals {
        let deg = e.neighbors.len();
        let keep = ((1.0 - gamma) * deg as f64).round() as usize;
        let non: Vec<usize> = {
            let mut it = e.neighbors.iter().peekable();
            (0..n)
                .filter(|u| {
                    if it.peek() == Some(&u) {
                        it.next();
                        false
                    } else {
                        true
                    }
                })
                .collect()
        };
        let add = (gamma * non.len() as f64).round() as usize;
        let mut pred: Vec<usize> =
            index::sample(&mut r, deg, keep.min(deg)).into_iter().map(|i| e.neighbors[i]).collect();
        pred.extend(index::sample(&mut r, non.len(), add.min(non.len())).into_iter().map(|i| non[i]));
        pred.sort_unstable();
        out.push(pred);
    }
    Ok(out)
}

/// Integral advice from a predicted graph. At step `t` the optimum is taken
/// over the true edges of `t` and the predicted edges of later arrivals,
/// with offline vertices already advised removed; `t`'s partner in it is the
/// advice for `t`.
pub fn advice_from_prediction(g: &GraphInstance, predicted: &[Vec<usize>]) -> Result<GraphInstance> {
    if predicted.len() != g.n_online() {
        return Err(Error::Parameter("prediction has the wrong number of arrivals".into()));
    }
    let mut available = vec![true; g.n_offline()];
    let mut out = g.without_advice();
    for t in 0..g.n_online() {
        let mut adj: Vec<&[usize]> = Vec::with_capacity(g.n_online() - t);
        adj.push(&g.arrivals[t].neighbors);
        adj.extend(predicted[t + 1..].iter().map(|p| p.as_slice()));
        let mate = greedy_matroid_matching(&g.weights, &adj, &available);
        if let Some(u) = mate[0] {
            available[u] = false;
            out.arrivals[t].advice = vec![(u, 1.0)];
        }
    }
    Ok(out)
}

/// `perturb_graph` followed by [`advice_from_prediction`].
pub fn generate_advice(g: &GraphInstance, gamma: f64, seed: u64) -> Result<GraphInstance> {
    let predicted = perturb_graph(g, gamma, seed)?;
    advice_from_prediction(g, &predicted)
}

/// Turns an undirected edge list into a bipartite instance: nodes are
/// shuffled, the first half become offline vertices and the second half
/// arrive online in shuffled order; only crossing edges are kept.
pub fn ingest_real(edge_list: &str, seed: u64) -> Result<GraphInstance> {
    let mut edges = Vec::new();
    for (i, line) in edge_list.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut toks = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let mut next = || -> Result<u64> {
            let tok = toks.next().ok_or_else(|| Error::parse(i + 1, "expected two node ids"))?;
            tok.parse().map_err(|_| Error::parse(i + 1, format!("bad node id `{tok}`")))
        };
        let (a, b) = (next()?, next()?);
        edges.push((a, b));
    }
    if edges.is_empty() {
        return Err(Error::parse(1, "edge list is empty"));
    }
    let min = edges.iter().map(|&(a, b)| a.min(b)).min().unwrap_or(0);
    let base = if min >= 1 { 1 } else { 0 };
    let count = (edges.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0) - base + 1) as usize;
    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut rng(seed));
    let half = count / 2;
    // role[node] = Ok(offline index) | Err(online index) | none if dropped
    let mut role: Vec<Option<std::result::Result<usize, usize>>> = vec![None; count];
    for (pos, &node) in perm.iter().enumerate() {
        role[node] = if pos < half {
            Some(Ok(pos))
        } else if pos < 2 * half {
            Some(Err(pos - half))
        } else {
            None
        };
    }
    let mut nbrs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); half];
    for &(a, b) in &edges {
        let (a, b) = ((a - base) as usize, (b - base) as usize);
        match (role[a], role[b]) {
            (Some(Ok(u)), Some(Err(v))) | (Some(Err(v)), Some(Ok(u))) => {
                nbrs[v].insert(u);
            }
            _ => {}
        }
    }
    let arrivals = nbrs.into_iter().map(|s| ArrivalEvent::new(s.into_iter().collect(), vec![])).collect();
    GraphInstance::unweighted(half, arrivals)
}
