//! Noise sweeps: every algorithm on the same instance and advice for each
//! `(gamma, trial)` cell, written as CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adwords::trial_seed;
use crate::baselines::{balance_run, follow_advice_run, greedy_run};
use crate::error::{Error, Result};
use crate::instance::GraphInstance;
use crate::lab::lab_run;
use crate::numerics::{lambda_lab_for_consistency, lambda_paw_for_consistency, unit_grid};
use crate::offline::{gen_er, gen_ut, generate_advice, ingest_real, opt_matching};
use crate::par;
use crate::paw::paw_run;

pub const CSV_HEADER: &str = "algorithm,lambda,gamma,trial,alg_value,opt_value,ratio";

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Er {
        n: usize,
        p: f64,
    },
    Ut {
        n: usize,
    },
    /// Undirected edge list, re-split per trial.
    Edges(PathBuf),
    /// A fixed instance file; its advice is replaced per cell.
    Instance(PathBuf),
}

impl Generator {
    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unrecognised generator '{s}'"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let nums = |arg: &str| -> Result<Vec<f64>> {
            arg.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        match kind.trim() {
            "er" => match nums(arg)?.as_slice() {
                &[n, p] if n >= 1.0 && n.fract() == 0.0 => Ok(Generator::Er { n: n as usize, p }),
                _ => Err(bad()),
            },
            "ut" => match nums(arg)?.as_slice() {
                &[n] if n >= 1.0 && n.fract() == 0.0 => Ok(Generator::Ut { n: n as usize }),
                _ => Err(bad()),
            },
            "edges" => Ok(Generator::Edges(arg.trim().into())),
            "instance" => Ok(Generator::Instance(arg.trim().into())),
            _ => Err(bad()),
        }
    }

    fn describe(&self) -> String {
        match self {
            Generator::Er { n, p } => format!("er:{n},{p}"),
            Generator::Ut { n } => format!("ut:{n}"),
            Generator::Edges(p) => format!("edges:{}", p.display()),
            Generator::Instance(p) => format!("instance:{}", p.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Lab,
    Paw,
    Balance,
    Greedy,
    Advice,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lab => "lab",
            Algorithm::Paw => "paw",
            Algorithm::Balance => "balance",
            Algorithm::Greedy => "greedy",
            Algorithm::Advice => "advice",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "lab" => Algorithm::Lab,
            "paw" => Algorithm::Paw,
            "balance" => Algorithm::Balance,
            "greedy" => Algorithm::Greedy,
            "advice" => Algorithm::Advice,
            other => return Err(Error::Parameter(format!("unknown algorithm '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub generator: Generator,
    pub weighted: bool,
    pub algorithms: Vec<Algorithm>,
    /// Consistency targets; each becomes one LAB and one PAW lambda.
    pub consistencies: Vec<f64>,
    pub gammas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            generator: Generator::Er { n: 100, p: 0.2 },
            weighted: false,
            algorithms: vec![Algorithm::Lab, Algorithm::Paw, Algorithm::Balance],
            consistencies: vec![0.7, 0.8, 0.9, 1.0],
            gammas: unit_grid(10),
            trials: 10,
            seed: 0,
            out: PathBuf::from("sweep-out"),
        }
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').filter(|t| !t.trim().is_empty()).map(|t| f(t.trim())).collect()
}

fn real(key: &str, t: &str) -> Result<f64> {
    t.parse().map_err(|_| Error::Parameter(format!("{key}: '{t}' is not a number")))
}

impl SweepConfig {
    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(i + 1, "expected key = value"))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "generator" => self.generator = Generator::parse(value)?,
            "weighted" => {
                self.weighted =
                    value.parse().map_err(|_| Error::Parameter(format!("weighted: '{value}' is not true/false")))?
            }
            "algorithms" => self.algorithms = parse_list(value, Algorithm::parse)?,
            "consistencies" => self.consistencies = parse_list(value, |t| real(key, t))?,
            "gammas" => {
                self.gammas = match value.strip_prefix("grid:") {
                    Some(k) => unit_grid(
                        k.trim().parse().map_err(|_| Error::Parameter(format!("gammas: bad grid '{value}'")))?,
                    ),
                    None => parse_list(value, |t| real(key, t))?,
                }
            }
            "trials" => self.trials = value.parse().map_err(|_| Error::Parameter(format!("trials: '{value}'")))?,
            "seed" => self.seed = value.parse().map_err(|_| Error::Parameter(format!("seed: '{value}'")))?,
            "out" => self.out = value.into(),
            _ => return Err(Error::Parameter(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let floor = 1.0 - (-1.0f64).exp();
        if let Some(&c) = self.consistencies.iter().find(|&&c| !(c > floor && c <= 1.0)) {
            return Err(Error::Parameter(format!("consistency target {c} outside (1 - 1/e, 1]")));
        }
        if let Some(&g) = self.gammas.iter().find(|&&g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::Parameter(format!("gamma {g} outside [0, 1]")));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Parameter("no algorithms configured".into()));
        }
        Ok(())
    }

    /// The resolved configuration in the same `key = value` form.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "generator = {}", self.generator.describe());
        let _ = writeln!(s, "weighted = {}", self.weighted);
        let algs: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let _ = writeln!(s, "algorithms = {}", algs.join(","));
        let _ = writeln!(s, "consistencies = {}", join(&self.consistencies));
        let _ = writeln!(s, "gammas = {}", join(&self.gammas));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out.display());
        s
    }

    /// `(algorithm, lambda)` pairs in output order.
    pub fn runs(&self) -> Result<Vec<(Algorithm, Option<f64>)>> {
        let mut out = Vec::new();
        for &a in &self.algorithms {
            match a {
                Algorithm::Lab => {
                    for &c in &self.consistencies {
                        out.push((a, Some(lambda_lab_for_consistency(c)?)));
                    }
                }
                Algorithm::Paw => {
                    for &c in &self.consistencies {
                        out.push((a, Some(lambda_paw_for_consistency(c)?)));
                    }
                }
                _ => out.push((a, None)),
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub algorithm: String,
    pub lambda: Option<f64>,
    pub gamma: f64,
    pub trial: usize,
    pub alg_value: f64,
    pub opt_value: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellError {
    pub algorithm: String,
    pub gamma: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub errors: Vec<CellError>,
}

/// Seed of the instance for `trial`; independent of gamma.
pub fn graph_seed(base: u64, trial: usize) -> u64 {
    trial_seed(base, trial as u64)
}

/// Seed of the advice for `(gamma, trial)`.
pub fn advice_seed(base: u64, gamma: f64, trial: usize) -> u64 {
    trial_seed(trial_seed(base ^ 0xAD71_CE00, gamma.to_bits()), trial as u64)
}

fn run_one(g: &GraphInstance, alg: Algorithm, lambda: Option<f64>) -> Result<f64> {
    let l = lambda.unwrap_or(0.0);
    Ok(match alg {
        Algorithm::Lab => lab_run(g, l)?.value,
        Algorithm::Paw => paw_run(g, l)?.value,
        Algorithm::Balance => balance_run(g)?.value,
        Algorithm::Greedy => greedy_run(g)?.value,
        Algorithm::Advice => follow_advice_run(g)?.value,
    })
}

enum Source {
    Generated,
    Edges(String),
    Fixed(GraphInstance),
}

fn base_instance(cfg: &SweepConfig, src: &Source, trial: usize) -> Result<GraphInstance> {
    let seed = graph_seed(cfg.seed, trial);
    match (&cfg.generator, src) {
        (Generator::Er { n, p }, _) => gen_er(*n, *p, cfg.weighted, seed),
        (Generator::Ut { n }, _) => gen_ut(*n, cfg.weighted, seed),
        (_, Source::Edges(text)) => ingest_real(text, seed),
        (_, Source::Fixed(g)) => Ok(g.without_advice()),
        _ => unreachable!("source matches generator"),
    }
}

/// Runs the sweep in memory. Rows are ordered by algorithm, lambda, gamma,
/// trial regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let runs = cfg.runs()?;
    let src = match &cfg.generator {
        Generator::Edges(p) => Source::Edges(fs::read_to_string(p)?),
        Generator::Instance(p) => Source::Fixed(GraphInstance::parse(&fs::read_to_string(p)?)?),
        _ => Source::Generated,
    };
    let cells: Vec<(usize, usize)> =
        (0..cfg.gammas.len()).flat_map(|gi| (0..cfg.trials).map(move |t| (gi, t))).collect();
    let results = par::map(&cells, |&(gi, trial)| {
        let gamma = cfg.gammas[gi];
        let prepared = base_instance(cfg, &src, trial)
            .and_then(|g| generate_advice(&g, gamma, advice_seed(cfg.seed, gamma, trial)));
        let g = match prepared {
            Ok(g) => g,
            Err(e) => return Err(e.to_string()),
        };
        let opt = opt_matching(&g).value;
        let out: Vec<std::result::Result<f64, String>> =
            runs.iter().map(|&(a, l)| run_one(&g, a, l).map_err(|e| e.to_string())).collect();
        Ok((opt, out))
    });

    let mut output = SweepOutput::default();
    for (k, &(alg, lambda)) in runs.iter().enumerate() {
        for (&(gi, trial), res) in cells.iter().zip(&results) {
            let gamma = cfg.gammas[gi];
            let err = |message: String| CellError { algorithm: alg.name().into(), gamma, trial, message };
            match res {
                Err(e) => output.errors.push(err(e.clone())),
                Ok((_, vals)) if vals[k].is_err() => output.errors.push(err(vals[k].clone().unwrap_err())),
                Ok((opt, vals)) => {
                    let v = *vals[k].as_ref().unwrap();
                    let ratio = if *opt > 0.0 { v / opt } else { 1.0 };
                    output.rows.push(SweepRow {
                        algorithm: alg.name().into(),
                        lambda,
                        gamma,
                        trial,
                        alg_value: v,
                        opt_value: *opt,
                        ratio,
                    });
                }
            }
        }
    }
    Ok(output)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            r.lambda.map(|l| l.to_string()).unwrap_or_default(),
            r.gamma.to_string(),
            r.trial.to_string(),
            r.alg_value.to_string(),
            r.opt_value.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn errors_to_csv(errors: &[CellError]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "gamma", "trial", "error"])?;
    for e in errors {
        w.write_record([e.algorithm.clone(), e.gamma.to_string(), e.trial.to_string(), e.message.clone()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses sweep CSV text.
pub fn read_rows(text: &str) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::parse(1, format!("expected header '{CSV_HEADER}'")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let ln = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| Error::parse(ln, format!("column {} is not a number", k + 1)))
        };
        rows.push(SweepRow {
            algorithm: rec[0].to_string(),
            lambda: if rec[1].is_empty() { None } else { Some(num(1)?) },
            gamma: num(2)?,
            trial: rec[3].parse().map_err(|_| Error::parse(ln, "trial is not an integer"))?,
            alg_value: num(4)?,
            opt_value: num(5)?,
            ratio: num(6)?,
        });
    }
    Ok(rows)
}

/// Runs the sweep under `MATCHKIT_WORKERS` and writes `results.csv`,
/// `errors.csv` and `config.txt` into `cfg.out`.
pub fn write_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    let output = par::with_workers(par::workers_from_env(), || run_sweep(cfg))?;
    let dir: &Path = &cfg.out;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), rows_to_csv(&output.rows)?)?;
    fs::write(dir.join("errors.csv"), errors_to_csv(&output.errors)?)?;
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            generator: Generator::Er { n: 12, p: 0.3 },
            gammas: vec![0.0, 0.5, 1.0],
            trials: 3,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn config_round_trip() {
        let cfg = SweepConfig::parse("# demo\ngenerator = ut:20\nweighted = true\nalgorithms = lab,balance\ngammas = grid:3\ntrials = 2\nseed = 9\n").unwrap();
        assert_eq!(cfg.generator, Generator::Ut { n: 20 });
        assert_eq!(cfg.gammas, vec![0.0, 0.5, 1.0]);
        assert_eq!(SweepConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(matches!(SweepConfig::parse("trials = 0"), Err(Error::Parameter(_))));
        assert!(matches!(SweepConfig::parse("colour = red"), Err(Error::Parse { line: 1, .. })));
        assert!(SweepConfig::parse("consistencies = 0.5").is_err());
    }

    #[test]
    fn deterministic_and_ordered() {
        let cfg = small();
        let a = rows_to_csv(&run_sweep(&cfg).unwrap().rows).unwrap();
        let b = rows_to_csv(&par::with_workers(Some(1), || run_sweep(&cfg)).unwrap().rows).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        let rows = read_rows(&a).unwrap();
        assert_eq!(rows.len(), (4 + 4 + 1) * 3 * 3);
        assert_eq!(rows_to_csv(&rows).unwrap(), a);
    }

    #[test]
    fn balance_ignores_gamma() {
        let out = run_sweep(&small()).unwrap();
        for r in out.rows.iter().filter(|r| r.algorithm == "balance") {
            let base = out.rows.iter().find(|q| q.algorithm == "balance" && q.trial == r.trial).unwrap();
            assert_eq!(r.alg_value, base.alg_value);
        }
    }

    #[test]
    fn weighted_paw_errors_are_recorded() {
        let cfg = SweepConfig { weighted: true, ..small() };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(out.errors.len(), 4 * 3 * 3);
        assert!(out.errors.iter().all(|e| e.algorithm == "paw"));
        assert_eq!(out.rows.len(), 5 * 3 * 3);
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig { out: dir.path().to_path_buf(), trials: 1, ..small() };
        write_sweep(&cfg).unwrap();
        for f in ["results.csv", "errors.csv", "config.txt"] {
            assert!(dir.path().join(f).exists());
        }
    }
}
