use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use matchkit::adversary::{empirical_tradeoff, run_contender, Contender, Which};
use matchkit::adwords::{self, rounding_trials, AdwordsInstance};
use matchkit::baselines::{balance_run, coinflip_run, follow_advice_run, greedy_run};
use matchkit::chart::{curve_chart, sweep_chart};
use matchkit::experiment::{read_rows, write_sweep, SweepConfig};
use matchkit::frlp::{self, export_lp, FrlpModel, TABLE_C};
use matchkit::numerics::{c_lab, c_paw, r_lab, r_paw, unit_grid};
use matchkit::offline::{gen_er, gen_ut, generate_advice, ingest_real, opt_matching};
use matchkit::{lab, par, paw, GraphInstance};

#[derive(Parser)]
#[command(name = "matchkit", version, about = "Online bipartite matching with advice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness/consistency curve of LAB or PAW as CSV `lambda,r,c`.
    Curve(CurveArgs),
    /// Run one algorithm on an instance file.
    Run(RunArgs),
    /// Play an algorithm against the adaptive hard instances.
    Adversary(AdversaryArgs),
    /// Build, export or solve the factor-revealing LP.
    Frlp(FrlpArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Turn an undirected edge list into a bipartite instance.
    Ingest(IngestArgs),
    /// Attach noisy advice to an instance.
    Advise(AdviseArgs),
    /// Run a noise sweep and write CSV results.
    Sweep(SweepArgs),
    /// Draw an SVG chart from sweep results or the tradeoff curves.
    Chart(ChartArgs),
    /// Fractional AdWords run plus randomised rounding.
    Adwords(AdwordsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Lab,
    Paw,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, value_enum)]
    alg: Family,
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Alg {
    Lab,
    Paw,
    Balance,
    Greedy,
    Advice,
    Coinflip,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    alg: Alg,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long)]
    instance: PathBuf,
    /// Check the dual certificate; exits with status 2 if it fails.
    #[arg(long)]
    certify: bool,
    /// Probability of following the advice, for `coinflip`.
    #[arg(long, default_value_t = 0.5)]
    mix: f64,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AdvAlg {
    Lab,
    Paw,
    Balance,
    Advice,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WhichArg {
    R,
    C,
    Both,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long, value_enum)]
    alg: AdvAlg,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, value_enum, default_value = "both")]
    which: WhichArg,
    /// Sweep `k` lambdas on [0, 1] instead (LAB or PAW), CSV `lambda,r_hat,c_hat`.
    #[arg(long, value_name = "K")]
    grid: Option<usize>,
}

#[derive(Args)]
struct FrlpArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0.55)]
    r: f64,
    /// Write the LP in CPLEX LP format.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["solve", "grid"])]
    export: Option<PathBuf>,
    /// Solve in-process (n at most 80).
    #[arg(long)]
    solve: bool,
    /// Solve on the published robustness grid, CSV `r,c_star,table_c`.
    #[arg(long, conflicts_with = "solve")]
    grid: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Erdos-Renyi `n,p`.
    #[arg(long, value_name = "N,P", group = "kind")]
    er: Option<String>,
    /// Upper-triangular with `n` vertices per side.
    #[arg(long, value_name = "N", group = "kind")]
    ut: Option<usize>,
    /// Small-bids AdWords instance `m,k,eps`.
    #[arg(long, value_name = "M,K,EPS", group = "kind")]
    adwords: Option<String>,
    #[arg(long)]
    weighted: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdviseArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set trials=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChartArgs {
    /// Sweep results CSV.
    #[arg(long, conflicts_with = "curve")]
    csv: Option<PathBuf>,
    /// Plot the LAB and PAW tradeoff curves instead.
    #[arg(long)]
    curve: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdwordsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    certify: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_graph(path: &Path) -> Result<GraphInstance> {
    GraphInstance::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn numbers(s: &str, k: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("{what}: expected {k} comma-separated numbers"))?;
    if v.len() != k {
        bail!("{what}: expected {k} comma-separated numbers, got {}", v.len());
    }
    Ok(v)
}

fn count(x: f64, what: &str) -> Result<usize> {
    if x < 0.0 || x.fract() != 0.0 {
        bail!("{what} must be a non-negative integer");
    }
    Ok(x as usize)
}

fn print_records(format: Format, records: &[Value]) {
    for rec in records {
        match format {
            Format::Jsonl => println!("{rec}"),
            Format::Csv => {
                let obj = rec.as_object().expect("records are objects");
                println!("{}", obj.keys().cloned().collect::<Vec<_>>().join(","));
                println!(
                    "{}",
                    obj.values().map(|v| v.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(",")
                );
            }
        }
    }
}

fn cmd_curve(a: &CurveArgs) -> Result<()> {
    if a.grid < 2 {
        bail!("--grid must be at least 2");
    }
    println!("lambda,r,c");
    for l in unit_grid(a.grid) {
        let (r, c) = match a.alg {
            Family::Lab => (r_lab(l), c_lab(l)),
            Family::Paw => (r_paw(l), c_paw(l)),
        };
        println!("{l},{r},{c}");
    }
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<bool> {
    let g = load_graph(&a.instance)?;
    let opt = opt_matching(&g).value;
    let ratio = |v: f64| if opt > 0.0 { v / opt } else { 1.0 };
    let name = a.alg.to_possible_value().expect("named").get_name().to_string();
    let mut records = Vec::new();
    let mut passed = true;
    let head = |value: f64, lambda: Option<f64>| json!({"algorithm": name, "lambda": lambda, "alg_value": value, "opt_value": opt, "ratio": ratio(value)});
    match a.alg {
        Alg::Lab => {
            let run = lab::lab_run(&g, a.lambda)?;
            records.push(head(run.value, Some(run.lambda)));
            if a.certify {
                let c = lab::certify(&g, &run);
                passed = c.passes(1e-8, 1e-6);
                records.push(json!({
                    "certificate": "lab", "passes": passed, "gap": c.gap, "dual": c.dual,
                    "robust_min": c.robust_min, "r_target": c.r_target,
                    "consistency_min": finite(c.consistency_min), "c_target": c.c_target,
                }));
            }
        }
        Alg::Paw => {
            let run = paw::paw_run(&g, a.lambda)?;
            records.push(head(run.value, Some(run.lambda)));
            if a.certify {
                let c = paw::certify(&g, &run);
                passed = c.passes(1e-8, 1e-6);
                records.push(json!({
                    "certificate": "paw", "passes": passed,
                    "gap_robust": c.gap_robust, "gap_consistent": c.gap_consistent,
                    "robust_min": finite(c.robust_min), "r_target": c.r_target,
                    "consistency_min": finite(c.consistency_min), "c_target": c.c_target,
                }));
            }
        }
        other => {
            if a.certify {
                bail!("--certify applies to lab and paw only");
            }
            let run = match other {
                Alg::Balance => balance_run(&g)?,
                Alg::Greedy => greedy_run(&g)?,
                Alg::Advice => follow_advice_run(&g)?,
                _ => coinflip_run(&g, a.mix)?,
            };
            records.push(head(run.value, None));
        }
    }
    print_records(a.format, &records);
    Ok(passed)
}

/// JSON has no infinity; an empty minimum is reported as null.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn contender(alg: AdvAlg, lambda: f64) -> Contender {
    match alg {
        AdvAlg::Lab => Contender::Lab(lambda),
        AdvAlg::Paw => Contender::Paw(lambda),
        AdvAlg::Balance => Contender::Balance,
        AdvAlg::Advice => Contender::Advice,
    }
}

fn cmd_adversary(a: &AdversaryArgs) -> Result<()> {
    if let Some(k) = a.grid {
        let make: fn(f64) -> Contender = match a.alg {
            AdvAlg::Lab => Contender::Lab,
            AdvAlg::Paw => Contender::Paw,
            _ => bail!("--grid applies to lab and paw only"),
        };
        let points = par::with_workers(par::workers_from_env(), || empirical_tradeoff(make, k, a.n))?;
        println!("lambda,r_hat,c_hat");
        for p in points {
            println!("{},{},{}", p.lambda, p.r_hat, p.c_hat);
        }
        return Ok(());
    }
    let c = contender(a.alg, a.lambda);
    let whiches: &[Which] = match a.which {
        WhichArg::R => &[Which::R],
        WhichArg::C => &[Which::C],
        WhichArg::Both => &[Which::R, Which::C],
    };
    println!("adversary,n,alg_value,opt_value,ratio");
    for &w in whiches {
        let t = run_contender(c, a.n, w)?;
        println!("{:?},{},{},{},{}", w, a.n, t.alg, t.opt, t.ratio());
    }
    Ok(())
}

fn cmd_frlp(a: &FrlpArgs) -> Result<()> {
    if let Some(path) = &a.export {
        let model = FrlpModel::build(a.n, a.r)?;
        fs::write(path, export_lp(&model.lp)).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {} ({} variables, {} rows)", path.display(), model.lp.n_vars(), model.lp.rows.len());
        return Ok(());
    }
    if a.grid {
        let rs = frlp::table_r_grid();
        let sols = par::with_workers(par::workers_from_env(), || frlp::solve_grid(a.n, &rs));
        println!("r,c_star,table_c");
        for ((r, s), t) in rs.iter().zip(sols).zip(TABLE_C) {
            println!("{r},{},{t}", s?.c_star);
        }
        return Ok(());
    }
    if !a.solve {
        bail!("choose one of --export FILE, --solve or --grid");
    }
    let s = frlp::solve_frlp_embedded(a.n, a.r)?;
    println!("n,r,c_star");
    println!("{},{},{}", s.n, s.r, s.c_star);
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let text = if let Some(spec) = &a.er {
        let v = numbers(spec, 2, "--er")?;
        gen_er(count(v[0], "n")?, v[1], a.weighted, a.seed)?.to_text()
    } else if let Some(n) = a.ut {
        gen_ut(n, a.weighted, a.seed)?.to_text()
    } else if let Some(spec) = &a.adwords {
        let v = numbers(spec, 3, "--adwords")?;
        adwords::gen_small_bids(count(v[0], "m")?, count(v[1], "k")?, v[2], a.seed)?.to_text()
    } else {
        bail!("choose one of --er N,P, --ut N or --adwords M,K,EPS");
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SweepConfig::parse(&read(p)?).with_context(|| format!("in {}", p.display()))?,
        None => SweepConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv}: expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(out) = &a.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    let out = write_sweep(&cfg)?;
    eprintln!("{} rows, {} cell errors written to {}", out.rows.len(), out.errors.len(), cfg.out.display());
    Ok(())
}

fn cmd_chart(a: &ChartArgs) -> Result<()> {
    let svg = if a.curve {
        curve_chart(201)?
    } else if let Some(p) = &a.csv {
        sweep_chart(&read_rows(&read(p)?)?)?
    } else {
        bail!("choose --csv FILE or --curve");
    };
    emit(Some(&a.out), &svg)
}

fn cmd_adwords(a: &AdwordsArgs) -> Result<bool> {
    let inst =
        AdwordsInstance::parse(&read(&a.instance)?).with_context(|| format!("parsing {}", a.instance.display()))?;
    let run = adwords::adwords_frac_run(&inst, a.lambda)?;
    let mut passed = true;
    let mut rec = json!({"lambda": run.lambda, "fractional_revenue": run.revenue});
    if a.certify {
        let c = adwords::certify(&inst, &run);
        passed = c.passes(1e-8, 1e-6);
        rec["certificate"] = json!({
            "passes": passed, "gap": c.gap, "robust_min": finite(c.robust_min), "r_target": c.r_target,
            "consistency_min": finite(c.consistency_min), "c_target": c.c_target,
        });
    }
    if a.trials > 0 {
        let s = par::with_workers(par::workers_from_env(), || {
            rounding_trials(&inst, a.lambda, a.epsilon, a.trials, a.seed)
        })?;
        rec["rounding"] = json!({
            "epsilon": a.epsilon, "trials": s.trials, "sampling_scale": s.gamma, "bound": s.bound,
            "mean_revenue": s.mean, "std_dev": s.std_dev, "lower_99": s.lower_confidence(2.326_347_874),
            "max_overspend": s.max_overspend,
        });
    }
    println!("{rec}");
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Curve(a) => cmd_curve(a).map(|_| true),
        Command::Run(a) => cmd_run(a),
        Command::Adversary(a) => cmd_adversary(a).map(|_| true),
        Command::Frlp(a) => cmd_frlp(a).map(|_| true),
        Command::Gen(a) => cmd_gen(a).map(|_| true),
        Command::Ingest(a) => read(&a.edges)
            .and_then(|t| Ok(ingest_real(&t, a.seed)?))
            .and_then(|g| emit(a.out.as_deref(), &g.to_text()))
            .map(|_| true),
        Command::Advise(a) => load_graph(&a.instance)
            .and_then(|g| Ok(generate_advice(&g, a.gamma, a.seed)?))
            .and_then(|g| emit(a.out.as_deref(), &g.to_text()))
            .map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Chart(a) => cmd_chart(a).map(|_| true),
        Command::Adwords(a) => cmd_adwords(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("certificate check failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
