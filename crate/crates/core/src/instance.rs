//! Instances, allocations and the `MATCHKIT v1` text format.
//!
//! ```text
//! MATCHKIT v1
//! offline 3 weighted
//! weights 1 2.5 0.75
//! arrival 0: 0 2 | a: 2=1
//! arrival 1: 1
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Tolerance used when checking feasibility of advice and allocations.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArrivalEvent {
    /// Sorted, distinct offline indices.
    pub neighbors: Vec<usize>,
    /// `(offline, amount)` sorted by offline index; every key is a neighbour.
    pub advice: Vec<(usize, f64)>,
}

impl ArrivalEvent {
    pub fn new(mut neighbors: Vec<usize>, mut advice: Vec<(usize, f64)>) -> Self {
        neighbors.sort_unstable();
        neighbors.dedup();
        advice.sort_by_key(|&(u, _)| u);
        Self { neighbors, advice }
    }

    pub fn advice_total(&self) -> f64 {
        self.advice.iter().map(|&(_, a)| a).sum()
    }

    pub fn advice_for(&self, u: usize) -> f64 {
        self.advice.iter().find(|&&(v, _)| v == u).map_or(0.0, |&(_, a)| a)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphInstance {
    pub weights: Vec<f64>,
    pub arrivals: Vec<ArrivalEvent>,
}

impl GraphInstance {
    pub fn new(weights: Vec<f64>, arrivals: Vec<ArrivalEvent>) -> Result<Self> {
        let g = Self { weights, arrivals };
        g.validate()?;
        Ok(g)
    }

    pub fn unweighted(n_offline: usize, arrivals: Vec<ArrivalEvent>) -> Result<Self> {
        Self::new(vec![1.0; n_offline], arrivals)
    }

    pub fn n_offline(&self) -> usize {
        self.weights.len()
    }

    pub fn n_online(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_unweighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn edge_count(&self) -> usize {
        self.arrivals.iter().map(|e| e.neighbors.len()).sum()
    }

    /// Total advised amount per offline vertex.
    pub fn advice_load(&self) -> Vec<f64> {
        let mut load = vec![0.0; self.n_offline()];
        for e in &self.arrivals {
            for &(u, a) in &e.advice {
                load[u] += a;
            }
        }
        load
    }

    /// Value of the advice read as a fractional matching.
    pub fn advice_value(&self) -> f64 {
        self.arrivals.iter().flat_map(|e| e.advice.iter()).map(|&(u, a)| self.weights[u] * a).sum()
    }

    /// Same graph, advice removed.
    pub fn without_advice(&self) -> Self {
        let arrivals =
            self.arrivals.iter().map(|e| ArrivalEvent { neighbors: e.neighbors.clone(), advice: vec![] }).collect();
        Self { weights: self.weights.clone(), arrivals }
    }

    /// Structural checks on every arrival.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_offline();
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Instance(format!("weight of offline {i} is {w}")));
            }
        }
        for (t, e) in self.arrivals.iter().enumerate() {
            check_event(e, n).map_err(|m| Error::Instance(format!("arrival {t}: {m}")))?;
        }
        Ok(())
    }

    /// Errors if some offline vertex is advised more than once in total.
    pub fn check_advice_feasible(&self) -> Result<()> {
        for (u, total) in self.advice_load().into_iter().enumerate() {
            if total > 1.0 + FEAS_TOL {
                return Err(Error::InfeasibleAdvice { vertex: u, total });
            }
        }
        Ok(())
    }

    /// Serialises to the `MATCHKIT v1` format. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut s = String::from("MATCHKIT v1\n");
        let weighted = !self.is_unweighted();
        let _ = writeln!(s, "offline {} {}", self.n_offline(), if weighted { "weighted" } else { "unweighted" });
        if weighted {
            s.push_str("weights");
            for w in &self.weights {
                let _ = write!(s, " {w}");
            }
            s.push('\n');
        }
        for (t, e) in self.arrivals.iter().enumerate() {
            let _ = write!(s, "arrival {t}:");
            for u in &e.neighbors {
                let _ = write!(s, " {u}");
            }
            if !e.advice.is_empty() {
                s.push_str(" | a:");
                for (u, a) in &e.advice {
                    let _ = write!(s, " {u}={a}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        if header != "MATCHKIT v1" {
            return Err(Error::parse(ln, format!("expected `MATCHKIT v1`, found `{header}`")));
        }
        let (ln, decl) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing `offline` line"))?;
        let (n, mode) = parse_offline_decl(ln, decl)?;
        let weighted = match mode {
            "weighted" => true,
            "unweighted" => false,
            other => return Err(Error::parse(ln, format!("unknown mode `{other}`"))),
        };
        let mut weights = vec![1.0; n];
        let mut arrivals = Vec::new();
        let mut pending = lines.peekable();
        if weighted {
            let (ln, wl) = pending.next().ok_or_else(|| Error::parse(ln + 1, "missing `weights` line"))?;
            weights = parse_number_list(ln, wl, "weights", n)?;
        }
        for (ln, line) in pending {
            let (k, body) = parse_arrival_head(ln, line)?;
            if k != arrivals.len() {
                return Err(Error::parse(ln, format!("expected arrival {}, found {k}", arrivals.len())));
            }
            let mut parts = body.split('|');
            let nb = parts.next().unwrap_or("");
            let mut neighbors = Vec::new();
            for tok in nb.split_whitespace() {
                neighbors.push(parse_index(ln, tok, n)?);
            }
            let mut advice = Vec::new();
            for part in parts {
                let part = part.trim();
                let rest =
                    part.strip_prefix("a:").ok_or_else(|| Error::parse(ln, format!("unknown section `{part}`")))?;
                advice = parse_pairs(ln, rest, n)?;
            }
            let event = event_from_parts(ln, neighbors, advice)?;
            arrivals.push(event);
        }
        let g = GraphInstance { weights, arrivals };
        g.validate()?;
        Ok(g)
    }
}

pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn parse_offline_decl(ln: usize, line: &str) -> Result<(usize, &str)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    match toks.as_slice() {
        ["offline", n, mode] => {
            let n = n.parse().map_err(|_| Error::parse(ln, format!("bad offline count `{n}`")))?;
            Ok((n, *mode))
        }
        _ => Err(Error::parse(ln, "expected `offline <n> <mode>`")),
    }
}

pub(crate) fn parse_number_list(ln: usize, line: &str, key: &str, n: usize) -> Result<Vec<f64>> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some(key) {
        return Err(Error::parse(ln, format!("expected `{key}` line")));
    }
    let vals = toks.map(|t| parse_real(ln, t)).collect::<Result<Vec<f64>>>()?;
    if vals.len() != n {
        return Err(Error::parse(ln, format!("expected {n} values, found {}", vals.len())));
    }
    if let Some(v) = vals.iter().find(|v| **v < 0.0) {
        return Err(Error::parse(ln, format!("negative value {v}")));
    }
    Ok(vals)
}

pub(crate) fn parse_arrival_head(ln: usize, line: &str) -> Result<(usize, &str)> {
    let rest =
        line.strip_prefix("arrival").ok_or_else(|| Error::parse(ln, format!("expected `arrival`, found `{line}`")))?;
    let (k, body) = rest.split_once(':').ok_or_else(|| Error::parse(ln, "missing `:` after arrival index"))?;
    let k = k.trim().parse().map_err(|_| Error::parse(ln, format!("bad arrival index `{}`", k.trim())))?;
    Ok((k, body))
}

pub(crate) fn parse_index(ln: usize, tok: &str, n: usize) -> Result<usize> {
    let u: usize = tok.parse().map_err(|_| Error::parse(ln, format!("bad offline index `{tok}`")))?;
    if u >= n {
        return Err(Error::parse(ln, format!("offline index {u} out of range (n = {n})")));
    }
    Ok(u)
}

pub(crate) fn parse_real(ln: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::parse(ln, format!("bad number `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(ln, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}

pub(crate) fn parse_pairs(ln: usize, text: &str, n: usize) -> Result<Vec<(usize, f64)>> {
    text.split_whitespace()
        .map(|tok| {
            let (u, v) =
                tok.split_once('=').ok_or_else(|| Error::parse(ln, format!("expected `u=value`, found `{tok}`")))?;
            Ok((parse_index(ln, u, n)?, parse_real(ln, v)?))
        })
        .collect()
}

fn event_from_parts(ln: usize, mut neighbors: Vec<usize>, mut advice: Vec<(usize, f64)>) -> Result<ArrivalEvent> {
    neighbors.sort_unstable();
    if neighbors.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::parse(ln, "duplicate neighbour"));
    }
    advice.sort_by_key(|&(u, _)| u);
    let event = ArrivalEvent { neighbors, advice };
    check_event(&event, usize::MAX).map_err(|m| Error::parse(ln, m))?;
    Ok(event)
}

fn check_event(e: &ArrivalEvent, n: usize) -> std::result::Result<(), String> {
    if e.neighbors.windows(2).any(|w| w[0] >= w[1]) {
        return Err("neighbourhood must be sorted and distinct".into());
    }
    if let Some(&u) = e.neighbors.iter().find(|&&u| u >= n) {
        return Err(format!("offline index {u} out of range"));
    }
    if e.advice.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err("advice keys must be sorted and distinct".into());
    }
    let mut total = 0.0;
    for &(u, a) in &e.advice {
        if e.neighbors.binary_search(&u).is_err() {
            return Err(format!("advice names {u}, which is not a neighbour"));
        }
        if !(a >= 0.0 && a <= 1.0 + FEAS_TOL) {
            return Err(format!("advice value {a} outside [0, 1]"));
        }
        total += a;
    }
    if total > 1.0 + FEAS_TOL {
        return Err(format!("advice sums to {total} > 1"));
    }
    Ok(())
}

/// A fractional assignment: `x[v]` lists `(offline, amount)` for arrival `v`
/// in neighbourhood order, and `levels[u]` is the total water in `u`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Allocation {
    pub x: Vec<Vec<(usize, f64)>>,
    pub levels: Vec<f64>,
}

impl Allocation {
    pub fn empty(n_offline: usize) -> Self {
        Self { x: vec![], levels: vec![0.0; n_offline] }
    }

    /// Appends one arrival's decision, aligned with `neighbors`.
    pub fn push(&mut self, neighbors: &[usize], amounts: &[f64]) {
        let row: Vec<(usize, f64)> = neighbors.iter().copied().zip(amounts.iter().copied()).collect();
        for &(u, x) in &row {
            self.levels[u] += x;
        }
        self.x.push(row);
    }

    /// `sum_u w_u X_u`.
    pub fn value(&self, weights: &[f64]) -> f64 {
        self.levels.iter().zip(weights).map(|(x, w)| x * w).sum()
    }

    pub fn get(&self, v: usize, u: usize) -> f64 {
        self.x[v].iter().find(|&&(w, _)| w == u).map_or(0.0, |&(_, x)| x)
    }
}

/// Checks that `alloc` is a fractional matching of `g`, up to `tol`.
pub fn validate_fractional_matching(g: &GraphInstance, alloc: &Allocation, tol: f64) -> Result<()> {
    if alloc.x.len() != g.n_online() || alloc.levels.len() != g.n_offline() {
        return Err(Error::Instance("allocation shape does not match the instance".into()));
    }
    let mut load = vec![0.0; g.n_offline()];
    for (v, (row, e)) in alloc.x.iter().zip(&g.arrivals).enumerate() {
        let mut total = 0.0;
        for &(u, x) in row {
            if e.neighbors.binary_search(&u).is_err() {
                return Err(Error::Instance(format!("x[{u},{v}] is not on an edge")));
            }
            if x < -tol {
                return Err(Error::Instance(format!("x[{u},{v}] = {x} is negative")));
            }
            total += x;
            load[u] += x;
        }
        if total > 1.0 + tol {
            return Err(Error::Instance(format!("online {v} is over-assigned ({total})")));
        }
    }
    for (u, (&l, &claimed)) in load.iter().zip(&alloc.levels).enumerate() {
        if l > 1.0 + tol {
            return Err(Error::Instance(format!("offline {u} is over-filled ({l})")));
        }
        if (l - claimed).abs() > tol.max(1e-9) {
            return Err(Error::Instance(format!("level of {u} is {claimed}, edges sum to {l}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> GraphInstance {
        GraphInstance::new(
            vec![1.0, 2.5, 0.75],
            vec![
                ArrivalEvent::new(vec![0, 2], vec![(2, 1.0)]),
                ArrivalEvent::new(vec![1], vec![]),
                ArrivalEvent::new(vec![], vec![]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let g = sample();
        let text = g.to_text();
        assert_eq!(GraphInstance::parse(&text).unwrap(), g);
        assert!(text.contains("arrival 0: 0 2 | a: 2=1\n"));
        assert!(text.contains("arrival 2:\n"));
    }

    #[test]
    fn unweighted_header_omits_weights() {
        let g = GraphInstance::unweighted(2, vec![ArrivalEvent::new(vec![0, 1], vec![(0, 0.5), (1, 0.25)])]).unwrap();
        let text = g.to_text();
        assert!(text.contains("offline 2 unweighted\n"));
        assert!(!text.contains("weights"));
        assert_eq!(GraphInstance::parse(&text).unwrap(), g);
    }

    fn parse_err_line(text: &str) -> usize {
        match GraphInstance::parse(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        assert_eq!(parse_err_line("MATCHKIT v2\n"), 1);
        assert_eq!(parse_err_line("MATCHKIT v1\noffline x unweighted\n"), 2);
        assert_eq!(parse_err_line("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 5\n"), 3);
        assert_eq!(parse_err_line("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 | a: 1=1\n"), 3);
        assert_eq!(
            parse_err_line("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0\narrival 1: 0 1 | a: 0=0.6 1=0.5\n"),
            4
        );
        assert_eq!(parse_err_line("MATCHKIT v1\noffline 2 weighted\nweights 1\n"), 3);
        assert_eq!(parse_err_line("MATCHKIT v1\noffline 2 unweighted\narrival 1: 0\n"), 3);
        assert_eq!(parse_err_line("MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 0\n"), 3);
    }

    #[test]
    fn advice_sum_tolerance() {
        let ok = "MATCHKIT v1\noffline 2 unweighted\narrival 0: 0 1 | a: 0=0.5 1=0.5000000001\n";
        assert!(GraphInstance::parse(ok).is_ok());
    }

    #[test]
    fn validation_catches_overfill() {
        let g = sample();
        let mut alloc = Allocation::empty(3);
        alloc.push(&[0, 2], &[0.5, 0.5]);
        alloc.push(&[1], &[1.0]);
        alloc.push(&[], &[]);
        validate_fractional_matching(&g, &alloc, 1e-9).unwrap();
        assert!((alloc.value(&g.weights) - (0.5 + 2.5 + 0.375)).abs() < 1e-12);
        alloc.x[1] = vec![(1, 1.5)];
        alloc.levels[1] = 1.5;
        assert!(validate_fractional_matching(&g, &alloc, 1e-9).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = GraphInstance> {
        (1usize..6, 0usize..6, any::<bool>()).prop_flat_map(|(n, m, weighted)| {
            let weights =
                if weighted { proptest::collection::vec(0.0..100.0f64, n).boxed() } else { Just(vec![1.0; n]).boxed() };
            let arrivals = proptest::collection::vec((proptest::collection::btree_set(0..n, 0..=n), 0.0..=1.0f64), m);
            (weights, arrivals).prop_map(|(weights, arrivals)| {
                let arrivals = arrivals
                    .into_iter()
                    .map(|(set, a)| {
                        let nb: Vec<usize> = set.into_iter().collect();
                        let adv = nb.first().map(|&u| vec![(u, a)]).unwrap_or_default();
                        ArrivalEvent::new(nb, adv)
                    })
                    .collect();
                GraphInstance { weights, arrivals }
            })
        })
    }

    proptest! {
        #[test]
        fn parse_serialize_identity(g in arb_instance()) {
            let text = g.to_text();
            let back = GraphInstance::parse(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
