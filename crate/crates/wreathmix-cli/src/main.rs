//! Command-line frontend: exact distance series, subset decompositions,
//! bound sweeps, seeded simulation, and the formula-vs-oracle verification
//! grid.
//!
//! Exit codes: 0 success, 1 usage error, 2 capacity exceeded,
//! 3 verification failure.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wreathmix::bounds::{
    aggregate_tables, bernoulli_laplace_mixing, coset_contraction_bound, coset_table_bound,
    lower_indicator, wreath_contraction_bound, wreath_table_bound, wreath_transposition_mixing,
    Family,
};
use wreathmix::decompose::Decomposition;
use wreathmix::engine::{
    build_coset_kernel, build_wreath_kernel, check_detailed_balance, connectivity, kstep,
    lp_distance, tv_distance, Kernel,
};
use wreathmix::measure::{parse_decimal, AlphabetMeasure, AugmentedMeasure, Mode};
use wreathmix::simulate::{estimate_tv, run_trajectories, SimConfig};
use wreathmix::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wreathmix",
    version,
    about = "Mixing-time analysis for label-refreshing chains on permutations and two-rack spaces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact L2/TV series from the dense kernel oracle.
    Exact(ExactArgs),
    /// Per-subset decomposition report at a fixed step count.
    Decompose(DecomposeArgs),
    /// Bound sweep over decay parameters c.
    Bounds(BoundsArgs),
    /// Seeded Monte Carlo run with a TV estimate against the oracle.
    Simulate(SimulateArgs),
    /// Formula-vs-oracle verification grid; exit 3 on failure.
    Verify(VerifyArgs),
}

/// Flags shared by every chain-building subcommand.
#[derive(Args, Clone)]
struct ChainArgs {
    /// Number of positions (required unless the measure comes from a file).
    #[arg(long)]
    n: Option<usize>,
    /// Rack-1 size for the coset family.
    #[arg(long)]
    r: Option<usize>,
    /// Alphabet size (needed with --p uniform).
    #[arg(long)]
    alphabet: Option<usize>,
    /// Alphabet law: "uniform" or comma decimals like "0.7,0.3".
    #[arg(long, default_value = "uniform")]
    p: String,
    /// "transposition", "bernoulli-laplace", or a measure JSON path.
    #[arg(long, default_value = "transposition")]
    measure: String,
    /// Start labels as 1-based letters, e.g. "1,1,2"; defaults to all 1.
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Largest step count of the series.
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long)]
    json: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump the transition kernel as CSV (from,to,prob) to this path.
    #[arg(long)]
    dump_kernel: Option<PathBuf>,
    /// Dump the step-k_max distribution as CSV (rank,prob,state).
    #[arg(long)]
    dump_dist: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Step count (k >= 1).
    #[arg(long)]
    k: usize,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Decay parameters, comma separated.
    #[arg(long, default_value = "0.5,1,2")]
    c: String,
    /// Contraction exponent hypothesis for the threshold bounds.
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    chain: ChainArgs,
    /// Number of steps per trajectory.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 100_000)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-state counts here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

struct Chain {
    measure: AugmentedMeasure,
    alphabet: AlphabetMeasure,
    x0: Vec<usize>,
}

fn build_chain(args: &ChainArgs) -> Result<Chain> {
    let name = args.measure.as_str();
    let measure = match name {
        "transposition" | "transpositions" => {
            let n = args
                .n
                .ok_or_else(|| Error::InvalidParameter("--n is required".into()))?;
            if args.r.is_some() {
                return Err(Error::InvalidParameter(
                    "--r only applies to the coset family".into(),
                ));
            }
            AugmentedMeasure::transpositions(n)?
        }
        "bernoulli-laplace" | "bl" => {
            let n = args
                .n
                .ok_or_else(|| Error::InvalidParameter("--n is required".into()))?;
            let r = args
                .r
                .ok_or_else(|| Error::InvalidParameter("--r is required for bernoulli-laplace".into()))?;
            AugmentedMeasure::bernoulli_laplace(n, r)?
        }
        path => {
            let m = AugmentedMeasure::load(path)?;
            if let Some(n) = args.n {
                if n != m.n() {
                    return Err(Error::InvalidParameter(format!(
                        "--n {n} conflicts with measure file n = {}",
                        m.n()
                    )));
                }
            }
            if let Some(r) = args.r {
                if m.mode().r() != Some(r) {
                    return Err(Error::InvalidParameter(format!(
                        "--r {r} conflicts with measure file mode {}",
                        m.mode()
                    )));
                }
            }
            m
        }
    };
    let alphabet = match args.p.as_str() {
        "uniform" => {
            let g = args.alphabet.ok_or_else(|| {
                Error::InvalidParameter("--alphabet is required with --p uniform".into())
            })?;
            AlphabetMeasure::uniform(g)?
        }
        list => {
            let probs = list
                .split(',')
                .map(parse_decimal)
                .collect::<Result<Vec<_>>>()?;
            if let Some(g) = args.alphabet {
                if g != probs.len() {
                    return Err(Error::InvalidParameter(format!(
                        "--alphabet {g} conflicts with {} probabilities",
                        probs.len()
                    )));
                }
            }
            AlphabetMeasure::new(probs)?
        }
    };
    let n = measure.n();
    let x0 = match &args.x0 {
        None => vec![0; n],
        Some(text) => {
            let letters = text
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad letter {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if letters.len() != n || letters.iter().any(|&x| x == 0 || x > alphabet.size()) {
                return Err(Error::InvalidParameter(format!(
                    "--x0 needs {n} letters in 1..={}",
                    alphabet.size()
                )));
            }
            letters.into_iter().map(|x| x - 1).collect()
        }
    };
    Ok(Chain { measure, alphabet, x0 })
}

fn build_kernel(chain: &Chain) -> Result<Kernel> {
    let kernel = match chain.measure.mode() {
        Mode::Plain => build_wreath_kernel(&chain.measure, &chain.alphabet)?,
        Mode::Coset { .. } => build_coset_kernel(&chain.measure, &chain.alphabet)?,
    };
    let conn = connectivity(&kernel);
    if !conn.irreducible || !conn.has_self_loop {
        eprintln!(
            "warning: kernel support is {}irreducible and has {}holding step; \
             the step measure may be stuck on a subgroup or one of its cosets",
            if conn.irreducible { "" } else { "not " },
            if conn.has_self_loop { "a" } else { "no" },
        );
    }
    Ok(kernel)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(std::io::stdout()),
    })
}

fn cmd_exact(args: &ExactArgs) -> Result<i32> {
    let chain = build_chain(&args.chain)?;
    let symmetric = chain.measure.is_augmented_symmetric();
    if !symmetric {
        eprintln!(
            "warning: step measure is not inversion-symmetric; \
             reversibility is unproven and the chi-square column is omitted"
        );
    }
    let kernel = build_kernel(&chain)?;
    if let Some(path) = &args.dump_kernel {
        kernel.to_csv(&mut File::create(path)?)?;
    }
    let reversible = symmetric && check_detailed_balance(&kernel, &chain.alphabet) <= 1e-10;
    let stat = kernel.space().stationary(&chain.alphabet);
    let start = kernel.space().start_rank(&chain.x0)?;
    let mut nu = kstep(&kernel, start, 0);
    let mut diag = Vec::new();
    let mut rows = Vec::new();
    let mut dist_at_kmax = nu.clone();
    let steps = if reversible { 2 * args.k_max } else { args.k_max };
    for step in 1..=steps {
        nu = kernel.step(&nu);
        if step <= args.k_max {
            let l2 = lp_distance(&nu, &stat, &stat, 2.0)?;
            let tv = tv_distance(&nu, &stat);
            rows.push((step, l2, tv));
        }
        if step == args.k_max {
            dist_at_kmax = nu.clone();
        }
        if step % 2 == 0 {
            diag.push(nu[start]);
        }
    }
    if let Some(path) = &args.dump_dist {
        wreathmix::engine::dist_to_csv(kernel.space(), &dist_at_kmax, &mut File::create(path)?)?;
    }
    let chi = |k: usize| -> Option<f64> {
        if reversible {
            Some(diag[k - 1] / stat[start] - 1.0)
        } else {
            None
        }
    };
    let mut w = sink(&args.out)?;
    if args.json {
        let items: Vec<serde_json::Value> = rows
            .iter()
            .map(|&(k, l2, tv)| {
                serde_json::json!({
                    "k": k, "l2": l2, "tv": tv, "chi_square": chi(k),
                })
            })
            .collect();
        writeln!(w, "{}", serde_json::to_string_pretty(&items)?)?;
    } else {
        writeln!(w, "k,l2,tv,chi_square")?;
        for &(k, l2, tv) in &rows {
            match chi(k) {
                Some(c) => writeln!(w, "{k},{l2:.17e},{tv:.17e},{c:.17e}")?,
                None => writeln!(w, "{k},{l2:.17e},{tv:.17e},")?,
            }
        }
    }
    Ok(0)
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<i32> {
    let chain = build_chain(&args.chain)?;
    let mut dec = Decomposition::new(&chain.measure, &chain.alphabet, &chain.x0)?;
    let report = dec.report(args.k)?;
    let mut w = sink(&args.out)?;
    if args.json {
        writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        report.to_csv(&mut w)?;
        eprintln!(
            "l2_squared = {:.12e}  l2 = {:.12e}  tv_bound = {:.12e}",
            report.l2_squared, report.l2, report.tv_bound
        );
    }
    Ok(0)
}

fn cmd_bounds(args: &BoundsArgs) -> Result<i32> {
    let chain = build_chain(&args.chain)?;
    let q = &chain.measure;
    let p_min = chain.alphabet.p_min();
    let n = q.n();
    let family = match q.mode() {
        Mode::Plain => Family::Wreath,
        Mode::Coset { .. } => Family::Coset,
    };
    let cs = args
        .c
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad c value {t:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    // Start from the minimum-probability letter so the escape prefactors
    // match the p_min-based closed forms.
    let x0 = vec![chain.alphabet.min_letter(); n];
    let mut dec = Decomposition::new(q, &chain.alphabet, &x0)?;
    let mut rows = Vec::new();
    for &c in &cs {
        let point = match family {
            Family::Wreath => wreath_transposition_mixing(n, p_min, c, 1.0)?,
            Family::Coset => bernoulli_laplace_mixing(n, p_min, c, 1.0)?,
        };
        let k = point.k.ceil().max(1.0) as usize;
        let exact_l2 = dec.report(k)?.l2;
        let tables = aggregate_tables(q, k)?;
        let table_bound = match family {
            Family::Wreath => wreath_table_bound(&tables, p_min),
            Family::Coset => coset_table_bound(&tables, p_min)?,
        };
        let contraction = match family {
            Family::Wreath => wreath_contraction_bound(n, p_min, args.m, c, tables.b)?,
            Family::Coset => coset_contraction_bound(n, p_min, args.m, c, tables.b)?,
        };
        rows.push(serde_json::json!({
            "n": n,
            "r": q.mode().r(),
            "p_min": p_min,
            "c": c,
            "k": k,
            "exact_l2": exact_l2,
            "table_bound_l2_squared": table_bound,
            "contraction_threshold_k": contraction.threshold_k,
            "contraction_bound": contraction.bound,
            "envelope": point.bound,
            "lower_indicator_l2_squared": lower_indicator(family, n, p_min, k),
        }));
    }
    let mut w = sink(&args.out)?;
    if args.json {
        writeln!(w, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else {
        writeln!(
            w,
            "n,r,p_min,c,k,exact_l2,table_bound_l2_squared,contraction_threshold_k,contraction_bound,envelope,lower_indicator_l2_squared"
        )?;
        for row in &rows {
            let g = |key: &str| row.get(key).unwrap();
            writeln!(
                w,
                "{},{},{},{},{},{:.12e},{:.12e},{:.6},{:.12e},{:.12e},{:.12e}",
                g("n"),
                g("r").as_u64().map(|v| v.to_string()).unwrap_or_default(),
                g("p_min").as_f64().unwrap(),
                g("c").as_f64().unwrap(),
                g("k"),
                g("exact_l2").as_f64().unwrap(),
                g("table_bound_l2_squared").as_f64().unwrap(),
                g("contraction_threshold_k").as_f64().unwrap(),
                g("contraction_bound").as_f64().unwrap(),
                g("envelope").as_f64().unwrap(),
                g("lower_indicator_l2_squared").as_f64().unwrap(),
            )?;
        }
    }
    Ok(0)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let chain = build_chain(&args.chain)?;
    let cfg = SimConfig {
        measure: &chain.measure,
        alphabet: &chain.alphabet,
        x0: chain.x0.clone(),
        steps: args.k,
        replicas: args.replicas,
        seed: args.seed,
    };
    let out = run_trajectories(&cfg)?;
    let kernel = build_kernel(&chain)?;
    let start = kernel.space().start_rank(&chain.x0)?;
    let exact = kstep(&kernel, start, args.k);
    let est = estimate_tv(&out.counts, &exact, args.seed)?;
    if let Some(path) = &args.out {
        let mut f = File::create(path)?;
        out.counts_csv(&mut f)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "tv": est.tv,
            "se": est.se,
            "bootstrap_mean": est.boot_mean,
            "n_replicas": out.replicas,
            "seed": out.seed,
            "steps": args.k,
        }))?
    );
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let (reports, ok) = wreathmix::verify::run_all(args.k_max, args.tol)?;
    let mut worst: f64 = 0.0;
    for r in &reports {
        let status = if r.passed(args.tol) {
            "PASS"
        } else if r.soft {
            "SOFT"
        } else {
            "FAIL"
        };
        println!(
            "{status} dev={:.3e} tv|l1={:.1e} chi|l2={:.1e} {}",
            r.max_rel_dev, r.tv_l1_dev, r.chi_vs_l2_dev, r.label
        );
        if !r.soft {
            worst = worst.max(r.max_rel_dev);
        }
    }
    println!(
        "{} cases, max hard deviation {worst:.3e}, tolerance {:.1e}: {}",
        reports.len(),
        args.tol,
        if ok { "OK" } else { "FAILED" }
    );
    Ok(if ok { 0 } else { 3 })
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match &cli.cmd {
        Cmd::Exact(args) => cmd_exact(args),
        Cmd::Decompose(args) => cmd_decompose(args),
        Cmd::Bounds(args) => cmd_bounds(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Capacity(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
