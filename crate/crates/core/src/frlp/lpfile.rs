//! CPLEX LP text: writer and a reader for the subset the writer produces
//! (plus the usual spellings other tools emit).

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{LinearProgram, Op};
use crate::error::{Error, Result};

fn fmt_coef(s: &mut String, first: bool, c: f64, name: &str) {
    let sign = if c < 0.0 {
        "-"
    } else if first {
        ""
    } else {
        "+"
    };
    let a = c.abs();
    let sep = if sign.is_empty() { "" } else { " " };
    if a == 1.0 {
        let _ = write!(s, " {sign}{sep}{name}");
    } else {
        let _ = write!(s, " {sign}{sep}{a:?} {name}");
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

/// Writes `lp` in CPLEX LP format. Coefficients keep full precision.
pub fn export_lp(lp: &LinearProgram) -> String {
    let mut s = String::new();
    s.push_str(if lp.maximize { "Maximize\n" } else { "Minimize\n" });
    if lp.objective.len() == 1 && lp.objective[0].1 == 1.0 {
        let _ = writeln!(s, "{}", lp.names[lp.objective[0].0]);
    } else {
        let mut line = String::new();
        for (k, &(j, c)) in lp.objective.iter().enumerate() {
            fmt_coef(&mut line, k == 0, c, &lp.names[j]);
        }
        let _ = writeln!(s, "{}", line.trim_start());
    }
    s.push_str("Subject To\n");
    for row in &lp.rows {
        let _ = write!(s, " {}:", row.name);
        for (k, &(j, c)) in row.terms.iter().enumerate() {
            fmt_coef(&mut s, k == 0, c, &lp.names[j]);
        }
        let op = match row.op {
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Eq => "=",
        };
        let _ = writeln!(s, " {op} {:?}", row.rhs);
    }
    s.push_str("Bounds\n");
    for (j, name) in lp.names.iter().enumerate() {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(s, " {name} free");
        } else {
            let _ = writeln!(s, " {} <= {name} <= {}", fmt_bound(lo), fmt_bound(hi));
        }
    }
    s.push_str("End\n");
    s
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximum" | "max" | "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_value(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn parse_op(tok: &str) -> Option<Op> {
    match tok {
        "<=" | "=<" | "<" => Some(Op::Le),
        ">=" | "=>" | ">" => Some(Op::Ge),
        "=" => Some(Op::Eq),
        _ => None,
    }
}

/// Splits `3x+2y<=4` style text into tokens.
fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(std::mem::take(cur));
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            flush(&mut cur, &mut out);
        } else if matches!(ch, '<' | '>' | '=') {
            flush(&mut cur, &mut out);
            let mut op = ch.to_string();
            if i + 1 < chars.len() && matches!(chars[i + 1], '<' | '>' | '=') {
                op.push(chars[i + 1]);
                i += 1;
            }
            out.push(op);
        } else if (ch == '+' || ch == '-')
            && !(cur.ends_with(['e', 'E']) && cur[..cur.len() - 1].parse::<f64>().is_ok())
        {
            flush(&mut cur, &mut out);
            out.push(ch.to_string());
        } else {
            cur.push(ch);
        }
        i += 1;
    }
    flush(&mut cur, &mut out);
    out
}

struct Reader {
    lp: LinearProgram,
    index: HashMap<String, usize>,
    explicit: Vec<bool>,
}

impl Reader {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        let j = self.lp.add_var(name, 0.0, f64::INFINITY);
        self.explicit.push(false);
        self.index.insert(name.to_string(), j);
        j
    }

    /// Parses `[+|-] [coef] name ...`, stopping at an operator.
    fn linear(&mut self, ln: usize, toks: &[String]) -> Result<(Vec<(usize, f64)>, usize)> {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        let mut k = 0;
        while k < toks.len() {
            let t = toks[k].as_str();
            if parse_op(t).is_some() {
                break;
            }
            match t {
                "+" => {}
                "-" => sign = -sign,
                _ => {
                    if let Ok(v) = t.parse::<f64>() {
                        if coef.is_some() {
                            return Err(Error::parse(ln, format!("two coefficients in a row near '{t}'")));
                        }
                        coef = Some(v);
                    } else {
                        let j = self.var(t);
                        let c = sign * coef.take().unwrap_or(1.0);
                        match terms.iter_mut().find(|(v, _)| *v == j) {
                            Some(e) => e.1 += c,
                            None => terms.push((j, c)),
                        }
                        sign = 1.0;
                    }
                }
            }
            k += 1;
        }
        if coef.is_some() {
            return Err(Error::parse(ln, "coefficient without a variable"));
        }
        Ok((terms, k))
    }

    fn bound(&mut self, ln: usize, toks: &[String]) -> Result<()> {
        let bad = || Error::parse(ln, format!("unrecognised bound '{}'", toks.join(" ")));
        let set = |r: &mut Reader, name: &str, lo: Option<f64>, hi: Option<f64>| {
            let j = r.var(name);
            if let Some(lo) = lo {
                r.lp.lower[j] = lo;
            }
            if let Some(hi) = hi {
                r.lp.upper[j] = hi;
            }
            r.explicit[j] = true;
        };
        let mut joined: Vec<String> = Vec::new();
        let mut k = 0;
        while k < toks.len() {
            if (toks[k] == "-" || toks[k] == "+") && k + 1 < toks.len() {
                joined.push(format!("{}{}", toks[k], toks[k + 1]));
                k += 2;
            } else {
                joined.push(toks[k].clone());
                k += 1;
            }
        }
        let t: Vec<&str> = joined.iter().map(String::as_str).collect();
        match t.as_slice() {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                set(self, name, Some(f64::NEG_INFINITY), Some(f64::INFINITY));
            }
            [lo, op1, name, op2, hi] => {
                let (lo, hi) = (parse_value(lo).ok_or_else(bad)?, parse_value(hi).ok_or_else(bad)?);
                if parse_op(op1) != Some(Op::Le) || parse_op(op2) != Some(Op::Le) {
                    return Err(bad());
                }
                set(self, name, Some(lo), Some(hi));
            }
            [a, op, b] => {
                let op = parse_op(op).ok_or_else(bad)?;
                let (name, v, op) = match (parse_value(a), parse_value(b)) {
                    (None, Some(v)) => (*a, v, op),
                    (Some(v), None) => {
                        let flipped = match op {
                            Op::Le => Op::Ge,
                            Op::Ge => Op::Le,
                            Op::Eq => Op::Eq,
                        };
                        (*b, v, flipped)
                    }
                    _ => return Err(bad()),
                };
                match op {
                    Op::Le => {
                        // A negative upper bound on a default-bounded
                        // variable implies an infinite lower bound.
                        let j = self.var(name);
                        let lo = if v < 0.0 && !self.explicit[j] { Some(f64::NEG_INFINITY) } else { None };
                        set(self, name, lo, Some(v));
                    }
                    Op::Ge => set(self, name, Some(v), None),
                    Op::Eq => set(self, name, Some(v), Some(v)),
                }
            }
            _ => return Err(bad()),
        }
        Ok(())
    }
}

/// Reads CPLEX LP text.
pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut r = Reader { lp: LinearProgram::new(true), index: HashMap::new(), explicit: vec![] };
    let mut section = Section::Start;
    let mut pending: Vec<String> = Vec::new();
    let mut pending_line = 0;
    let mut row_count = 0;
    let mut seen_objective = false;

    let finish_row = |r: &mut Reader, toks: &mut Vec<String>, ln: usize, count: &mut usize| -> Result<()> {
        if toks.is_empty() {
            return Ok(());
        }
        let mut body: &[String] = toks;
        let name = if body.len() >= 2 && body[1] == ":" {
            let n = body[0].clone();
            body = &body[2..];
            n
        } else if let Some(n) = body[0].strip_suffix(':') {
            let n = n.to_string();
            body = &body[1..];
            n
        } else {
            format!("r{}", *count + 1)
        };
        let (terms, k) = r.linear(ln, body)?;
        let op =
            body.get(k).and_then(|t| parse_op(t)).ok_or_else(|| Error::parse(ln, "constraint has no comparison"))?;
        let rhs_toks = &body[k + 1..];
        let rhs = match rhs_toks {
            [v] => parse_value(v),
            [s, v] if s == "-" => parse_value(v).map(|x| -x),
            [s, v] if s == "+" => parse_value(v),
            _ => None,
        }
        .ok_or_else(|| Error::parse(ln, "constraint right-hand side must be a single number"))?;
        r.lp.add_row(name, terms, op, rhs);
        *count += 1;
        toks.clear();
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(next) = section_of(line) {
            if section == Section::Rows {
                finish_row(&mut r, &mut pending, pending_line, &mut row_count)?;
            }
            if next == Section::Objective {
                r.lp.maximize = line.to_ascii_lowercase().starts_with("max");
            }
            section = next;
            continue;
        }
        let mut toks = tokenize(line);
        match section {
            Section::Start => return Err(Error::parse(ln, "expected Maximize or Minimize")),
            Section::End => return Err(Error::parse(ln, "content after End")),
            Section::Objective => {
                if toks.first().is_some_and(|t| t.ends_with(':')) {
                    toks.remove(0);
                } else if toks.get(1).is_some_and(|t| t == ":") {
                    toks.drain(..2);
                }
                let (terms, k) = r.linear(ln, &toks)?;
                if k != toks.len() {
                    return Err(Error::parse(ln, "comparison in objective"));
                }
                r.lp.objective.extend(terms);
                seen_objective = true;
            }
            Section::Rows => {
                let starts_new =
                    toks.first().is_some_and(|t| t.ends_with(':')) || toks.get(1).is_some_and(|t| t == ":");
                let complete = |p: &[String]| {
                    let k = p.iter().position(|t| parse_op(t).is_some());
                    k.is_some_and(|k| k + 1 < p.len())
                };
                if starts_new && !pending.is_empty() {
                    finish_row(&mut r, &mut pending, pending_line, &mut row_count)?;
                }
                if pending.is_empty() {
                    pending_line = ln;
                }
                pending.extend(toks);
                if complete(&pending) {
                    finish_row(&mut r, &mut pending, pending_line, &mut row_count)?;
                }
            }
            Section::Bounds => r.bound(ln, &toks)?,
        }
    }
    if section != Section::End {
        return Err(Error::parse(text.lines().count().max(1), "missing End"));
    }
    if !seen_objective {
        return Err(Error::parse(1, "missing objective"));
    }
    Ok(r.lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frlp::FrlpModel;

    #[test]
    fn objective_line_is_c() {
        let text = export_lp(&FrlpModel::build(3, 0.55).unwrap().lp);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("Maximize"));
        assert_eq!(lines.next(), Some("c"));
        assert!(text.contains(" c free\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn round_trip() {
        for n in [1, 2, 4] {
            let lp = FrlpModel::build(n, 1.0 - (-1.0f64).exp()).unwrap().lp;
            let back = parse_lp(&export_lp(&lp)).unwrap();
            assert_eq!(back.n_vars(), lp.n_vars());
            let map: Vec<usize> = back.names.iter().map(|n| lp.index_of(n).unwrap()).collect();
            for (j, &k) in map.iter().enumerate() {
                assert_eq!((back.lower[j], back.upper[j]), (lp.lower[k], lp.upper[k]));
            }
            assert_eq!(back.rows.len(), lp.rows.len());
            for (a, b) in back.rows.iter().zip(&lp.rows) {
                let mapped: Vec<(usize, f64)> = a.terms.iter().map(|&(j, c)| (map[j], c)).collect();
                assert_eq!((&a.name, &mapped, a.op, a.rhs), (&b.name, &b.terms, b.op, b.rhs));
            }
            assert_eq!(back.objective.len(), 1);
            assert_eq!(back.names[back.objective[0].0], "c");
        }
    }

    #[test]
    fn reads_foreign_spellings() {
        let text = "\\ hand written\nMINIMIZE\n obj: 2 x + 3 y\nst\n c1: x + y\n   >= 1\n -x+2.5e-1 y<=4\nBOUNDS\n x <= 10\n y >= -1e+2\nEND\n";
        let lp = parse_lp(text).unwrap();
        assert!(!lp.maximize);
        assert_eq!(lp.objective, vec![(0, 2.0), (1, 3.0)]);
        assert_eq!(lp.rows.len(), 2);
        assert_eq!(lp.rows[1].terms, vec![(0, -1.0), (1, 0.25)]);
        assert_eq!(lp.rows[1].op, Op::Le);
        assert_eq!(lp.upper[0], 10.0);
        assert_eq!(lp.lower[1], -100.0);
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_lp("Maximize\nc\nSubject To\n r: c 3\nEnd\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(matches!(parse_lp("c\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_lp("Maximize\nc\n"), Err(Error::Parse { .. })));
    }
}
