//! Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's
//! rule after a run of degenerate pivots. Meant for small cross-checks.

use super::{LinearProgram, Op};
use crate::error::{Error, Result};

const EPS: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;

/// How an original variable maps onto nonnegative columns.
enum Map {
    Shift(usize, f64),
    Mirror(usize, f64),
    Split(usize, usize),
}

struct Tableau {
    /// `m + 1` rows of `cols + 1` entries; the last row is the reduced cost
    /// row of a minimisation, the last column the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimises the cost row over columns `allowed`. Returns false if
    /// unbounded.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Result<bool> {
        let m = self.basis.len();
        let cost = m;
        let rhs = self.cols;
        let mut degenerate = 0;
        for _ in 0..50_000 {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -EPS;
            for j in (0..self.cols).filter(|&j| allowed(j)) {
                let d = self.t[cost][j];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > EPS {
                    let ratio = self.t[i][rhs] / a;
                    let better = match leave {
                        None => true,
                        Some((k, r)) => ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < self.basis[k]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            degenerate = if ratio.abs() <= EPS { degenerate + 1 } else { 0 };
            self.pivot(r, c);
        }
        Err(Error::Lp("simplex iteration limit reached".into()))
    }
}

/// Solves `lp`, returning the objective and a primal point.
pub fn solve_dense(lp: &LinearProgram) -> Result<(f64, Vec<f64>)> {
    // Nonnegative columns for the structural variables.
    let mut maps = Vec::with_capacity(lp.n_vars());
    let mut ncols = 0;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..lp.n_vars() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo > hi {
            return Err(Error::LpInfeasible);
        }
        if lo.is_finite() {
            maps.push(Map::Shift(ncols, lo));
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(Map::Mirror(ncols, hi));
            ncols += 1;
        } else {
            maps.push(Map::Split(ncols, ncols + 1));
            ncols += 2;
        }
    }
    let n_struct = ncols;

    // Rows over the structural columns, right-hand sides made nonnegative.
    let mut rows: Vec<(Vec<(usize, f64)>, Op, f64)> = Vec::new();
    for row in &lp.rows {
        let mut terms = Vec::new();
        let mut rhs = row.rhs;
        for &(j, a) in &row.terms {
            match maps[j] {
                Map::Shift(c, lo) => {
                    terms.push((c, a));
                    rhs -= a * lo;
                }
                Map::Mirror(c, hi) => {
                    terms.push((c, -a));
                    rhs -= a * hi;
                }
                Map::Split(p, q) => {
                    terms.push((p, a));
                    terms.push((q, -a));
                }
            }
        }
        rows.push((terms, row.op, rhs));
    }
    for &(c, u) in &upper_rows {
        rows.push((vec![(c, 1.0)], Op::Le, u));
    }
    for r in rows.iter_mut() {
        if r.2 < 0.0 {
            for t in r.0.iter_mut() {
                t.1 = -t.1;
            }
            r.2 = -r.2;
            r.1 = match r.1 {
                Op::Le => Op::Ge,
                Op::Ge => Op::Le,
                Op::Eq => Op::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Op::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Op::Le).count();
    let cols = n_struct + n_slack + n_art;
    let art_start = n_struct + n_slack;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n_struct, art_start);
    for (i, (terms, op, rhs)) in rows.iter().enumerate() {
        for &(c, v) in terms {
            t[i][c] += v;
        }
        t[i][cols] = *rhs;
        match op {
            Op::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Op::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Op::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };

    // Phase one: minimise the sum of artificials.
    if n_art > 0 {
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..=cols {
                    let v = tab.t[i][j];
                    tab.t[m][j] -= v;
                }
            }
        }
        for j in art_start..cols {
            tab.t[m][j] = 0.0;
        }
        tab.run(&|_| true)?;
        if -tab.t[m][cols] > 1e-8 {
            return Err(Error::LpInfeasible);
        }
        // Drive degenerate artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.t[i][c].abs() > 1e-9) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    // Phase two: original objective as a minimisation.
    let sign = if lp.maximize { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; cols + 1];
    for &(j, c) in &lp.objective {
        match maps[j] {
            Map::Shift(col, _) => cost[col] += sign * c,
            Map::Mirror(col, _) => cost[col] -= sign * c,
            Map::Split(p, q) => {
                cost[p] += sign * c;
                cost[q] -= sign * c;
            }
        }
    }
    for i in 0..m {
        let f = cost[tab.basis[i]];
        if f != 0.0 {
            for j in 0..=cols {
                cost[j] -= f * tab.t[i][j];
            }
        }
    }
    tab.t[m] = cost;
    if !tab.run(&|j| j < art_start)? {
        return Err(Error::LpUnbounded);
    }

    let mut col_val = vec![0.0; cols];
    for i in 0..m {
        col_val[tab.basis[i]] = tab.t[i][cols];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            Map::Shift(c, lo) => lo + col_val[c],
            Map::Mirror(c, hi) => hi - col_val[c],
            Map::Split(p, q) => col_val[p] - col_val[q],
        })
        .collect();
    Ok((lp.objective_value(&x), x))
}
