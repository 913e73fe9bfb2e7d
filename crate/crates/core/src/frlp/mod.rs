//! The factor-revealing LP: the best consistency any algorithm can reach on
//! the adversaries while keeping robustness `r`.
//!
//! Solved in-process for small `n` (sparse simplex); larger instances are
//! exported in CPLEX LP format for an external solver.

mod lpfile;
mod simplex;

pub use lpfile::{export_lp, parse_lp};
pub use simplex::solve_dense;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::instance::{Allocation, ArrivalEvent, GraphInstance};
use crate::par;

/// Largest `n` the embedded solver accepts.
pub const SOLVE_CAP: usize = 80;

/// Robustness values of the published upper-bound table (n = 1000).
pub fn table_r_grid() -> Vec<f64> {
    vec![0.5, 0.525, 0.55, 0.575, 0.6, 0.625, 1.0 - (-1.0f64).exp()]
}

/// Consistency bounds reported alongside [`table_r_grid`].
pub const TABLE_C: [f64; 7] = [1.0, 0.974, 0.944, 0.908, 0.862, 0.788, 0.731];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub op: Op,
    pub rhs: f64,
}

/// A generic LP: maximise or minimise `objective . x` subject to `rows` and
/// `lower <= x <= upper` (infinite bounds allowed).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub maximize: bool,
    pub names: Vec<String>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(maximize: bool) -> Self {
        Self { maximize, names: vec![], objective: vec![], rows: vec![], lower: vec![], upper: vec![] }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, op: Op, rhs: f64) {
        self.rows.push(Row { name: name.into(), terms, op, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.op {
                Op::Le => lhs - row.rhs,
                Op::Ge => row.rhs - lhs,
                Op::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }
}

/// How the defining equalities are written. Both describe the same
/// feasible set; `Recursive` expresses each prefix sum through its
/// predecessor, which keeps rows short and the solve fast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Form {
    #[default]
    Literal,
    Recursive,
}

/// The LP for a given `n` and `r`, with index helpers.
#[derive(Clone, Debug)]
pub struct FrlpModel {
    pub n: usize,
    pub r: f64,
    pub lp: LinearProgram,
    c: usize,
    x: Vec<usize>,
    xb: Vec<usize>,
    d: Vec<usize>,
    db: Vec<usize>,
    /// `y[t][i - t]` for `i >= t` (0-based).
    y: Vec<Vec<usize>>,
    /// `big_d[t][i - t]` for `i >= t`.
    big_d: Vec<Vec<usize>>,
}

impl FrlpModel {
    /// The LP exactly as displayed: every defined quantity is a prefix sum.
    pub fn build(n: usize, r: f64) -> Result<Self> {
        Self::build_with(n, r, Form::Literal)
    }

    pub fn build_with(n: usize, r: f64, form: Form) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Parameter(format!("r = {r} outside [0, 1]")));
        }
        let mut lp = LinearProgram::new(true);
        let c = lp.add_var("c", f64::NEG_INFINITY, f64::INFINITY);
        lp.objective = vec![(c, 1.0)];
        let unit = |lp: &mut LinearProgram, name: String| lp.add_var(name, 0.0, 1.0);
        let mut x = vec![];
        let mut xb = vec![];
        let mut d = vec![];
        let mut db = vec![];
        for t in 1..=n {
            x.push(unit(&mut lp, format!("x_{t}")));
            xb.push(unit(&mut lp, format!("xb_{t}")));
            d.push(unit(&mut lp, format!("d_{t}")));
            db.push(unit(&mut lp, format!("db_{t}")));
        }
        let mut y = vec![];
        let mut big_d = vec![];
        for t in 1..=n {
            y.push((t..=n).map(|i| unit(&mut lp, format!("y_{i}_{t}"))).collect::<Vec<_>>());
            big_d.push((t..=n).map(|i| unit(&mut lp, format!("D_{t}_{i}"))).collect::<Vec<_>>());
        }
        let nn = n as f64;
        for t in 0..n {
            let k = (2 * n - 2 * (t + 1) + 1) as f64;
            lp.add_row(format!("cap_{}", t + 1), vec![(x[t], 1.0), (xb[t], k)], Op::Le, 1.0);
            let terms = match (form, t) {
                (Form::Recursive, 1..) => {
                    vec![(d[t], 1.0), (x[t], -1.0), (d[t - 1], -1.0), (x[t - 1], 1.0), (xb[t - 1], -1.0)]
                }
                _ => {
                    let mut terms = vec![(d[t], 1.0), (x[t], -1.0)];
                    terms.extend((0..t).map(|i| (xb[i], -1.0)));
                    terms
                }
            };
            lp.add_row(format!("level_{}", t + 1), terms, Op::Eq, 0.0);
            let terms = match (form, t) {
                (Form::Recursive, 1..) => vec![(db[t], 1.0), (db[t - 1], -1.0), (xb[t], -1.0)],
                _ => {
                    let mut terms = vec![(db[t], 1.0)];
                    terms.extend((0..=t).map(|i| (xb[i], -1.0)));
                    terms
                }
            };
            lp.add_row(format!("excluded_{}", t + 1), terms, Op::Eq, 0.0);
            if t + 1 < n {
                lp.add_row(format!("sorted_{}", t + 1), vec![(d[t], 1.0), (d[t + 1], -1.0)], Op::Le, 0.0);
            }
            lp.add_row(format!("arrival_{}", t + 1), y[t].iter().map(|&v| (v, 1.0)).collect(), Op::Le, 1.0);
        }
        for t in 0..n {
            for i in t..n {
                let terms = match (form, t) {
                    (Form::Recursive, 1..) => {
                        vec![(big_d[t][i - t], 1.0), (big_d[t - 1][i - t + 1], -1.0), (y[t][i - t], -1.0)]
                    }
                    _ => {
                        let mut terms = vec![(big_d[t][i - t], 1.0), (d[i], -1.0)];
                        terms.extend((0..=t).map(|s| (y[s][i - s], -1.0)));
                        terms
                    }
                };
                lp.add_row(format!("fill_{}_{}", t + 1, i + 1), terms, Op::Eq, 0.0);
                if i + 1 < n {
                    lp.add_row(
                        format!("order_{}_{}", t + 1, i + 1),
                        vec![(big_d[t][i - t], 1.0), (big_d[t][i + 1 - t], -1.0)],
                        Op::Le,
                        0.0,
                    );
                }
            }
        }
        let mut terms: Vec<(usize, f64)> = (0..n).flat_map(|t| [(d[t], 1.0), (db[t], 1.0)]).collect();
        terms.extend(y.iter().flatten().map(|&v| (v, 1.0)));
        lp.add_row("robustness", terms, Op::Ge, 2.0 * nn * r);
        let mut terms: Vec<(usize, f64)> = d.iter().map(|&v| (v, 1.0)).collect();
        terms.push((c, -2.0 * nn));
        lp.add_row("consistency", terms, Op::Ge, -nn);
        Ok(Self { n, r, lp, c, x, xb, d, db, y, big_d })
    }

    pub fn c_index(&self) -> usize {
        self.c
    }

    /// Levels encoded by a solution: `d_t` and `db_t` after the common
    /// phase, and the final level `D_{t,t}` of vertex `t` against `R`.
    pub fn levels(&self, values: &[f64]) -> [Vec<f64>; 3] {
        let get = |v: &[usize]| v.iter().map(|&j| values[j]).collect();
        [get(&self.d), get(&self.db), self.big_d.iter().map(|row| values[row[0]]).collect()]
    }
}

/// An optimal point.
#[derive(Clone, Debug)]
pub struct FrlpSolution {
    pub n: usize,
    pub r: f64,
    pub c_star: f64,
    pub values: Vec<f64>,
}

/// Solves an arbitrary [`LinearProgram`] with the sparse simplex.
pub fn solve_sparse(lp: &LinearProgram) -> Result<(f64, Vec<f64>)> {
    let dir = if lp.maximize { OptimizationDirection::Maximize } else { OptimizationDirection::Minimize };
    let mut prob = Problem::new(dir);
    let mut obj = vec![0.0; lp.n_vars()];
    for &(j, c) in &lp.objective {
        obj[j] += c;
    }
    let vars: Vec<_> = (0..lp.n_vars()).map(|j| prob.add_var(obj[j], (lp.lower[j], lp.upper[j]))).collect();
    for row in &lp.rows {
        let op = match row.op {
            Op::Le => ComparisonOp::Le,
            Op::Ge => ComparisonOp::Ge,
            Op::Eq => ComparisonOp::Eq,
        };
        prob.add_constraint(row.terms.iter().map(|&(j, a)| (vars[j], a)).collect::<Vec<_>>(), op, row.rhs);
    }
    let sol = match prob.solve() {
        Ok(outcome) => outcome.into_solution().map_err(|_| Error::Lp("solve interrupted".into()))?,
        Err(microlp::Error::Infeasible) => return Err(Error::LpInfeasible),
        Err(microlp::Error::Unbounded) => return Err(Error::LpUnbounded),
        Err(e) => return Err(Error::Lp(e.to_string())),
    };
    let values: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
    Ok((lp.objective_value(&values), values))
}

/// Solves the LP in-process; `n` must be at most [`SOLVE_CAP`].
pub fn solve_frlp_embedded(n: usize, r: f64) -> Result<FrlpSolution> {
    if n > SOLVE_CAP {
        return Err(Error::TooLarge { n, cap: SOLVE_CAP });
    }
    let model = FrlpModel::build_with(n, r, Form::Recursive)?;
    let (c_star, values) = solve_sparse(&model.lp)?;
    Ok(FrlpSolution { n, r, c_star, values })
}

/// Solves for every `r` in `rs`.
pub fn solve_grid(n: usize, rs: &[f64]) -> Vec<Result<FrlpSolution>> {
    par::map(rs, |&r| solve_frlp_embedded(n, r))
}

/// `c*` for `n = 1`, in closed form.
pub fn c_star_n1(r: f64) -> f64 {
    (1.5 - r).min(1.0)
}

/// Plays an LP solution back as an algorithm against both adversaries
/// (ties broken so no re-ordering happens). Returns the realised instances,
/// allocations and values for `R` then `C`.
pub fn replay(model: &FrlpModel, values: &[f64]) -> Result<[(GraphInstance, Allocation, f64); 2]> {
    let n = model.n;
    let val = |j: usize| values[j].max(0.0);
    let mut common = Vec::new();
    let mut common_x = Vec::new();
    for t in 1..=n {
        let nb: Vec<usize> = (t - 1..2 * n - t + 1).collect();
        let x: Vec<f64> =
            nb.iter().map(|&u| if u == t - 1 { val(model.x[t - 1]) } else { val(model.xb[t - 1]) }).collect();
        common.push(ArrivalEvent { neighbors: nb, advice: vec![(t - 1, 1.0)] });
        common_x.push(x);
    }
    let build = |arrivals: Vec<ArrivalEvent>, xs: Vec<Vec<f64>>| -> Result<(GraphInstance, Allocation, f64)> {
        let g = GraphInstance::unweighted(2 * n, arrivals)?;
        let mut alloc = Allocation::empty(2 * n);
        for (e, x) in g.arrivals.iter().zip(&xs) {
            alloc.push(&e.neighbors, x);
        }
        let value = alloc.levels.iter().sum();
        Ok((g, alloc, value))
    };
    let (mut ra, mut rx) = (common.clone(), common_x.clone());
    for s in 1..=n {
        ra.push(ArrivalEvent { neighbors: (s - 1..n).collect(), advice: vec![] });
        rx.push((s..=n).map(|i| val(model.y[s - 1][i - s])).collect());
    }
    let (mut ca, mut cx) = (common, common_x);
    let mut levels = vec![0.0; 2 * n];
    for (e, x) in ca.iter().zip(&cx) {
        for (&u, &a) in e.neighbors.iter().zip(x) {
            levels[u] += a;
        }
    }
    for t in n + 1..=2 * n {
        ca.push(ArrivalEvent { neighbors: vec![t - 1], advice: vec![(t - 1, 1.0)] });
        cx.push(vec![(1.0 - levels[t - 1]).max(0.0)]);
    }
    Ok([build(ra, rx)?, build(ca, cx)?])
}
