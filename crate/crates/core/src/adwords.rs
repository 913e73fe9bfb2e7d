//! Budgeted allocation: LAB with budget fractions, and randomised rounding
//! under small bids.
//!
//! Text format (extends `MATCHKIT v1`):
//!
//! ```text
//! MATCHKIT v1
//! offline 2 adwords
//! budgets 10 5
//! arrival 0: b: 0=0.5 1=0.25 | a: 0=1
//! ```

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{
    content_lines, parse_arrival_head, parse_number_list, parse_offline_decl, parse_pairs, FEAS_TOL,
};
use crate::lab::{solve_level, Inversion, Slot};
use crate::numerics::{c_lab, r_lab, Penalty};
use crate::par;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdArrival {
    /// `(advertiser, bid)` with positive bids, sorted by advertiser.
    pub bids: Vec<(usize, f64)>,
    /// `(advertiser, fraction of the impression)`.
    pub advice: Vec<(usize, f64)>,
}

impl AdArrival {
    pub fn bid(&self, u: usize) -> f64 {
        self.bids.iter().find(|b| b.0 == u).map_or(0.0, |b| b.1)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdwordsInstance {
    pub budgets: Vec<f64>,
    pub arrivals: Vec<AdArrival>,
}

impl AdwordsInstance {
    pub fn new(budgets: Vec<f64>, arrivals: Vec<AdArrival>) -> Result<Self> {
        let inst = Self { budgets, arrivals };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_advertisers(&self) -> usize {
        self.budgets.len()
    }

    /// Largest bid-to-budget ratio.
    pub fn small_bids_ratio(&self) -> f64 {
        self.arrivals.iter().flat_map(|a| a.bids.iter()).map(|&(u, b)| b / self.budgets[u]).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_advertisers();
        if let Some(b) = self.budgets.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Instance(format!("budget {b} must be positive")));
        }
        let mut spend = vec![0.0; n];
        for (t, a) in self.arrivals.iter().enumerate() {
            let bad = |m: String| Error::Instance(format!("arrival {t}: {m}"));
            if a.bids.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(bad("bids must be sorted by advertiser and distinct".into()));
            }
            for &(u, b) in &a.bids {
                if u >= n || !(b.is_finite() && b > 0.0) {
                    return Err(bad(format!("bad bid {u}={b}")));
                }
            }
            let mut total = 0.0;
            for &(u, x) in &a.advice {
                let b = a.bid(u);
                if b == 0.0 {
                    return Err(bad(format!("advice names {u}, which did not bid")));
                }
                if !(0.0..=1.0 + FEAS_TOL).contains(&x) {
                    return Err(bad(format!("advice value {x} outside [0, 1]")));
                }
                total += x;
                spend[u] += b * x;
            }
            if total > 1.0 + FEAS_TOL {
                return Err(bad(format!("advice sums to {total}")));
            }
        }
        for (u, s) in spend.iter().enumerate() {
            if *s > self.budgets[u] * (1.0 + FEAS_TOL) {
                return Err(Error::InfeasibleAdvice { vertex: u, total: s / self.budgets[u] });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("MATCHKIT v1\noffline {} adwords\nbudgets", self.n_advertisers());
        for b in &self.budgets {
            let _ = write!(s, " {b}");
        }
        s.push('\n');
        for (t, a) in self.arrivals.iter().enumerate() {
            let _ = write!(s, "arrival {t}: b:");
            for (u, b) in &a.bids {
                let _ = write!(s, " {u}={b}");
            }
            if !a.advice.is_empty() {
                s.push_str(" | a:");
                for (u, x) in &a.advice {
                    let _ = write!(s, " {u}={x}");
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
            return Err(Error::parse(ln, "expected `MATCHKIT v1`"));
        }
        let (ln, decl) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing `offline` line"))?;
        let (n, mode) = parse_offline_decl(ln, decl)?;
        if mode != "adwords" {
            return Err(Error::parse(ln, format!("expected mode `adwords`, found `{mode}`")));
        }
        let (ln, bl) = lines.next().ok_or_else(|| Error::parse(ln + 1, "missing `budgets` line"))?;
        let budgets = parse_number_list(ln, bl, "budgets", n)?;
        let mut arrivals = Vec::new();
        for (ln, line) in lines {
            let (k, body) = parse_arrival_head(ln, line)?;
            if k != arrivals.len() {
                return Err(Error::parse(ln, format!("expected arrival {}, found {k}", arrivals.len())));
            }
            let mut arrival = AdArrival::default();
            for part in body.split('|').map(str::trim).filter(|p| !p.is_empty()) {
                if let Some(rest) = part.strip_prefix("b:") {
                    arrival.bids = parse_pairs(ln, rest, n)?;
                } else if let Some(rest) = part.strip_prefix("a:") {
                    arrival.advice = parse_pairs(ln, rest, n)?;
                } else {
                    return Err(Error::parse(ln, format!("unknown section `{part}`")));
                }
            }
            arrival.bids.sort_by_key(|p| p.0);
            arrival.advice.sort_by_key(|p| p.0);
            arrivals.push(arrival);
        }
        let inst = AdwordsInstance { budgets, arrivals };
        inst.validate().map_err(|e| match e {
            Error::Instance(m) => Error::parse(ln, m),
            other => other,
        })?;
        Ok(inst)
    }
}

/// Fractional run with its dual solution.
#[derive(Clone, Debug)]
pub struct AdwordsRun {
    pub lambda: f64,
    /// Per arrival: `(advertiser, fraction of the impression)`.
    pub x: Vec<Vec<(usize, f64)>>,
    /// Spent budget fraction per advertiser.
    pub spent: Vec<f64>,
    /// Advised budget fraction per advertiser.
    pub advised: Vec<f64>,
    pub revenue: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn adwords_frac_run(inst: &AdwordsInstance, lambda: f64) -> Result<AdwordsRun> {
    inst.validate()?;
    let p = Penalty::new(lambda)?;
    let n = inst.n_advertisers();
    let (mut a, mut x) = (vec![0.0; n], vec![0.0; n]);
    let mut alpha = vec![0.0; n];
    let mut beta = Vec::with_capacity(inst.arrivals.len());
    let mut rows = Vec::with_capacity(inst.arrivals.len());
    let mut revenue = 0.0;
    for arr in &inst.arrivals {
        for &(u, adv) in &arr.advice {
            a[u] += arr.bid(u) * adv / inst.budgets[u];
        }
        let slots: Vec<Slot> = arr
            .bids
            .iter()
            .map(|&(u, b)| Slot { weight: b, a: a[u].min(1.0), x: x[u], scale: inst.budgets[u] / b })
            .collect();
        let z = solve_level(&slots, &p, Inversion::Closed);
        let mut row = Vec::with_capacity(z.len());
        let mut total = 0.0;
        for (&(u, b), &dz) in arr.bids.iter().zip(&z) {
            x[u] = (x[u] + dz).min(1.0);
            let share = dz * inst.budgets[u] / b;
            revenue += b * share;
            total += share;
            row.push((u, share));
        }
        let bv = if total >= 1.0 - FEAS_TOL {
            arr.bids.iter().map(|&(u, b)| b * (1.0 - p.f(a[u].min(1.0), x[u]))).fold(0.0, f64::max)
        } else {
            0.0
        };
        for &(u, share) in &row {
            alpha[u] += share * (arr.bid(u) - bv);
        }
        beta.push(bv);
        rows.push(row);
    }
    Ok(AdwordsRun { lambda: p.lambda(), x: rows, spent: x, advised: a, revenue, alpha, beta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdwordsCertificate {
    pub revenue: f64,
    pub gap: f64,
    /// `min ((b/B) alpha_u + beta_v) / b` over bidding pairs.
    pub robust_min: f64,
    /// `min (alpha_u + sum_t a beta_t) / (B_u A_u)` over advised advertisers.
    pub consistency_min: f64,
    pub r_target: f64,
    pub c_target: f64,
}

impl AdwordsCertificate {
    pub fn passes(&self, gap_rel: f64, slack: f64) -> bool {
        self.gap <= gap_rel * self.revenue.max(1e-12)
            && self.robust_min >= self.r_target - slack
            && self.consistency_min >= self.c_target - slack
    }
}

pub fn certify(inst: &AdwordsInstance, run: &AdwordsRun) -> AdwordsCertificate {
    let dual = run.alpha.iter().sum::<f64>() + run.beta.iter().sum::<f64>();
    let mut robust_min = f64::INFINITY;
    let mut credit = run.alpha.clone();
    for (v, arr) in inst.arrivals.iter().enumerate() {
        for &(u, b) in &arr.bids {
            robust_min = robust_min.min((b / inst.budgets[u] * run.alpha[u] + run.beta[v]) / b);
        }
        for &(u, a) in &arr.advice {
            credit[u] += a * run.beta[v];
        }
    }
    let mut consistency_min = f64::INFINITY;
    for (u, &a) in run.advised.iter().enumerate() {
        if a > 0.0 {
            consistency_min = consistency_min.min(credit[u] / (inst.budgets[u] * a));
        }
    }
    AdwordsCertificate {
        revenue: run.revenue,
        gap: (run.revenue - dual).abs(),
        robust_min,
        consistency_min,
        r_target: r_lab(run.lambda),
        c_target: c_lab(run.lambda),
    }
}

/// Sampling scale `1 - eps - sqrt(eps ln(1/eps))`.
pub fn rounding_gamma(eps: f64) -> f64 {
    1.0 - eps - (eps * (1.0 / eps).ln()).sqrt()
}

/// Guaranteed fraction `1 - 3 sqrt(eps ln(1/eps))` of the fractional revenue.
pub fn rounding_bound(eps: f64) -> f64 {
    1.0 - 3.0 * (eps * (1.0 / eps).ln()).sqrt()
}

/// Largest `eps` with a positive sampling scale.
pub fn epsilon_max() -> f64 {
    let (mut lo, mut hi) = (1e-6, 0.999);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rounding_gamma(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralOutcome {
    pub revenue: f64,
    pub assignment: Vec<Option<usize>>,
    /// Spend per advertiser in bid units.
    pub spend: Vec<f64>,
}

/// Rounds a fractional run: each impression picks advertiser `u` with
/// probability `gamma x_{u,v}` (or nobody) and is assigned only if the
/// budget still covers the bid.
pub fn adwords_round(inst: &AdwordsInstance, frac: &AdwordsRun, eps: f64, seed: u64) -> Result<IntegralOutcome> {
    let gamma = rounding_gamma(eps);
    if !(eps > 0.0 && eps < 1.0) || !(gamma > 0.0 && gamma < 1.0 - eps) {
        return Err(Error::Parameter(format!(
            "epsilon {eps} gives sampling scale {gamma}; use epsilon < {:.4}",
            epsilon_max()
        )));
    }
    let ratio = inst.small_bids_ratio();
    if ratio > eps * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("largest bid/budget ratio {ratio} exceeds epsilon {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spend = vec![0.0; inst.n_advertisers()];
    let mut assignment = Vec::with_capacity(inst.arrivals.len());
    let mut revenue = 0.0;
    for (arr, row) in inst.arrivals.iter().zip(&frac.x) {
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = None;
        for &(u, x) in row {
            acc += gamma * x;
            if draw < acc {
                pick = Some(u);
                break;
            }
        }
        let chosen = pick.filter(|&u| spend[u] + arr.bid(u) <= inst.budgets[u]);
        if let Some(u) = chosen {
            spend[u] += arr.bid(u);
            revenue += arr.bid(u);
        }
        assignment.push(chosen);
    }
    Ok(IntegralOutcome { revenue, assignment, spend })
}

/// Mixes a trial index into a base seed.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Summary of many rounding trials.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingStats {
    pub fractional: f64,
    pub gamma: f64,
    pub bound: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub trials: usize,
    pub max_overspend: f64,
}

impl RoundingStats {
    /// Lower end of a one-sided interval for the mean at normal quantile `z`.
    pub fn lower_confidence(&self, z: f64) -> f64 {
        self.mean - z * self.std_dev / (self.trials as f64).sqrt()
    }
}

pub fn rounding_trials(
    inst: &AdwordsInstance,
    lambda: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<RoundingStats> {
    let frac = adwords_frac_run(inst, lambda)?;
    let ids: Vec<u64> = (0..trials as u64).collect();
    let outcomes: Vec<IntegralOutcome> =
        par::map(&ids, |&t| adwords_round(inst, &frac, eps, trial_seed(seed, t))).into_iter().collect::<Result<_>>()?;
    let revenues: Vec<f64> = outcomes.iter().map(|o| o.revenue).collect();
    let mean = revenues.iter().sum::<f64>() / trials.max(1) as f64;
    let var = revenues.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (trials.max(2) - 1) as f64;
    let max_overspend = outcomes
        .iter()
        .flat_map(|o| o.spend.iter().zip(&inst.budgets).map(|(s, b)| s - b))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RoundingStats {
        fractional: frac.revenue,
        gamma: rounding_gamma(eps),
        bound: rounding_bound(eps),
        mean,
        std_dev: var.sqrt(),
        trials,
        max_overspend,
    })
}

/// Random small-bids instance: `m` advertisers with budget 1, `k`
/// impressions, bids uniform in `[eps/2, eps]` for a random subset, and
/// advice from a random feasible fractional assignment.
pub fn gen_small_bids(m: usize, k: usize, eps: f64, seed: u64) -> Result<AdwordsInstance> {
    if m == 0 || !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter("need at least one advertiser and eps in (0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budgets = vec![1.0; m];
    let mut left = vec![1.0; m];
    let mut arrivals = Vec::with_capacity(k);
    for _ in 0..k {
        let mut bids: Vec<(usize, f64)> = Vec::new();
        for u in 0..m {
            if rng.gen_bool(0.6) {
                bids.push((u, rng.gen_range(0.5 * eps..=eps)));
            }
        }
        if bids.is_empty() {
            let u = rng.gen_range(0..m);
            bids.push((u, rng.gen_range(0.5 * eps..=eps)));
        }
        let (u, b) = bids[rng.gen_range(0..bids.len())];
        let share = (left[u] / b).min(1.0);
        let advice = if share > 0.0 && rng.gen_bool(0.8) {
            left[u] -= b * share;
            vec![(u, share)]
        } else {
            vec![]
        };
        arrivals.push(AdArrival { bids, advice });
    }
    AdwordsInstance::new(budgets, arrivals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{ArrivalEvent, GraphInstance};
    use crate::lab::lab_run;

    #[test]
    fn vertex_weighted_reduction() {
        let w = vec![2.0, 1.0, 3.0];
        let g = GraphInstance::new(
            w.clone(),
            vec![
                ArrivalEvent::new(vec![0, 1], vec![(1, 1.0)]),
                ArrivalEvent::new(vec![0, 1, 2], vec![(0, 0.5)]),
                ArrivalEvent::new(vec![2], vec![(2, 1.0)]),
            ],
        )
        .unwrap();
        let inst = AdwordsInstance::new(
            w.clone(),
            g.arrivals
                .iter()
                .map(|e| AdArrival { bids: e.neighbors.iter().map(|&u| (u, w[u])).collect(), advice: e.advice.clone() })
                .collect(),
        )
        .unwrap();
        for lambda in [0.0, 0.3, 0.8] {
            let lab = lab_run(&g, lambda).unwrap();
            let ad = adwords_frac_run(&inst, lambda).unwrap();
            assert!((lab.value - ad.revenue).abs() < 1e-9);
            for (v, row) in ad.x.iter().enumerate() {
                for &(u, x) in row {
                    assert!((x - lab.allocation.get(v, u)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn round_trip_text() {
        let inst = gen_small_bids(3, 12, 0.1, 4).unwrap();
        let back = AdwordsInstance::parse(&inst.to_text()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn epsilon_threshold() {
        let e0 = epsilon_max();
        assert!(rounding_gamma(e0) > 0.0 && rounding_gamma(e0 + 1e-6) < 0.0);
        assert!((e0 - 0.394_229_8).abs() < 1e-6);
        let inst = gen_small_bids(2, 4, 0.01, 0).unwrap();
        let frac = adwords_frac_run(&inst, 0.5).unwrap();
        assert!(adwords_round(&inst, &frac, 0.5, 0).is_err());
        assert!(adwords_round(&inst, &frac, 0.005, 0).is_err());
    }

    #[test]
    fn rounding_is_seeded_and_within_budget() {
        let inst = gen_small_bids(4, 300, 0.05, 2).unwrap();
        let frac = adwords_frac_run(&inst, 0.4).unwrap();
        let a = adwords_round(&inst, &frac, 0.05, 17).unwrap();
        assert_eq!(a, adwords_round(&inst, &frac, 0.05, 17).unwrap());
        for (s, b) in a.spend.iter().zip(&inst.budgets) {
            assert!(s <= b);
        }
    }

    #[test]
    fn single_advertiser_fill() {
        let inst = AdwordsInstance::new(
            vec![1.0],
            (0..100).map(|_| AdArrival { bids: vec![(0, 0.01)], advice: vec![] }).collect(),
        )
        .unwrap();
        let s = rounding_trials(&inst, 0.0, 0.01, 10_000, 1).unwrap();
        assert!((s.fractional - 1.0).abs() < 1e-9);
        assert!(s.lower_confidence(2.326) >= s.bound * s.fractional);
        assert!(s.max_overspend <= 0.0);
    }
}
