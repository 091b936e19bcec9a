use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use clap::Parser;
use rayon::prelude::*;

use fpsdp::bench::flops::flop_estimate;
use fpsdp::bench::registry::{lookup, Benchmark, BENCHMARKS};
use fpsdp::bench::report::{render, sort_rows, Format, Row};
use fpsdp::expr::{parse_program, Expr};
use fpsdp::float::Precision;
use fpsdp::interval::BoxDomain;
use fpsdp::mvbeta::DEFAULT_BUDGET;
use fpsdp::pipeline::{Analysis, FpsdpError, FpsdpOptions, Method};

/// Certified lower bounds on the roundoff error of polynomial programs.
#[derive(Parser, Debug)]
#[command(name = "fpsdp", version)]
struct Cli {
    /// Benchmark id (a..i), benchmark name, or `all`.
    #[arg(long, conflicts_with = "file")]
    bench: Option<String>,
    /// Program file in the `vars ... expr ...; prec ...;` language.
    #[arg(long)]
    file: Option<PathBuf>,
    /// geneig, mvbeta, robsdp, sample, abssum or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// Relaxation order, or a comma-separated list of orders.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    order: Vec<u32>,
    /// Overrides the precision of the program.
    #[arg(long)]
    prec: Option<Precision>,
    /// Number of random inputs for the sampling bound.
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Seed for sampling and the abssum search.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// md, csv or json.
    #[arg(long, default_value = "md")]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest number of (eta, beta) pairs mvbeta may enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Wall-clock limit per cell in seconds; slower cells are reported as timed out.
    #[arg(long)]
    time_limit: Option<f64>,
}

struct Target {
    program: String,
    tree: Expr,
    domain: BoxDomain,
    precision: Precision,
    bench: Option<&'static Benchmark>,
}

enum Outcome {
    Done(Result<fpsdp::pipeline::BoundReport, FpsdpError>),
    TimedOut,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("fpsdp: {msg}");
    ExitCode::from(1)
}

fn targets(cli: &Cli) -> Result<Vec<Target>, String> {
    if let Some(path) = &cli.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let prog = parse_program(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let (tree, precision) = match cli.prec {
            // Literals follow the requested precision.
            Some(p) if p != prog.precision => {
                let mut retagged = prog.clone();
                retagged.precision = p;
                let text = fpsdp::expr::format_program(&retagged);
                (parse_program(&text).map_err(|e| e.to_string())?.expr, p)
            }
            _ => (prog.expr, prog.precision),
        };
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok(vec![Target {
            program: name,
            tree,
            domain: prog.domain,
            precision,
            bench: None,
        }]);
    }
    let id = cli
        .bench
        .as_deref()
        .ok_or("one of --bench or --file is required")?;
    let chosen: Vec<&'static Benchmark> = if id == "all" {
        BENCHMARKS.iter().collect()
    } else {
        vec![lookup(id).ok_or_else(|| format!("unknown benchmark `{id}`"))?]
    };
    let precision = cli.prec.unwrap_or(Precision::Double);
    Ok(chosen
        .into_iter()
        .map(|b| Target {
            program: b.id.to_string(),
            tree: b.tree_with(precision),
            domain: b.domain(),
            precision,
            bench: Some(b),
        })
        .collect())
}

fn methods(spec: &str) -> Result<Vec<Method>, String> {
    if spec == "all" {
        Ok(Method::ALL.to_vec())
    } else {
        Ok(vec![spec.parse::<Method>()?])
    }
}

fn run_cell(
    analysis: &Analysis,
    method: Method,
    k: u32,
    opts: FpsdpOptions,
    limit: Option<f64>,
) -> Outcome {
    let Some(limit) = limit else {
        return Outcome::Done(analysis.bound(method, k, &opts));
    };
    let (tx, rx) = mpsc::channel();
    let a = analysis.clone();
    // An abandoned cell keeps running until the process exits.
    std::thread::spawn(move || {
        let _ = tx.send(a.bound(method, k, &opts));
    });
    match rx.recv_timeout(Duration::from_secs_f64(limit.max(0.0))) {
        Ok(r) => Outcome::Done(r),
        Err(_) => Outcome::TimedOut,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = std::env::var("FPSDP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    let targets = match targets(&cli) {
        Ok(t) => t,
        Err(e) => return usage(e),
    };
    let methods = match methods(&cli.method) {
        Ok(m) => m,
        Err(e) => return usage(e),
    };
    if cli.order.contains(&0) && methods.iter().any(|m| m.is_hierarchy()) {
        return usage("relaxation order must be at least 1");
    }
    if cli.samples == 0 {
        return usage("--samples must be at least 1");
    }
    let opts = FpsdpOptions {
        mvbeta_budget: cli.budget,
        samples: cli.samples,
        seed: cli.seed,
        ..FpsdpOptions::default()
    };

    let analyses: Vec<Result<Analysis, FpsdpError>> = targets
        .par_iter()
        .map(|t| Analysis::new(&t.tree, &t.domain, t.precision, opts.rounding))
        .collect();

    let mut cells: Vec<(usize, Method, u32)> = Vec::new();
    for ti in 0..targets.len() {
        for &method in &methods {
            if method.is_hierarchy() {
                cells.extend(cli.order.iter().map(|&k| (ti, method, k)));
            } else {
                cells.push((ti, method, 0));
            }
        }
    }

    let make_row = |&(ti, method, k): &(usize, Method, u32)| {
        let t = &targets[ti];
        let mut row = Row {
            program: t.program.clone(),
            method,
            k,
            precision: t.precision,
            emulated: t.precision == Precision::Single,
            n: t.domain.dim(),
            m: 0,
            flops: None,
            bound: None,
            error: None,
            reference: t.bench.and_then(|b| b.reference(method, k)),
            upper_fixture: t.bench.map(|b| b.upper),
        };
        match &analyses[ti] {
            Err(e) => row.error = Some(e.to_string()),
            Ok(a) => {
                row.m = a.m();
                row.flops = flop_estimate(method, a.n() as u64, a.m() as u64, k as u64);
                match run_cell(a, method, k, opts, cli.time_limit) {
                    Outcome::Done(Ok(r)) => row.bound = Some(r),
                    Outcome::Done(Err(e)) => row.error = Some(e.to_string()),
                    Outcome::TimedOut => row.error = Some("time limit exceeded".into()),
                }
            }
        }
        row
    };
    // A waiting cell must not occupy a pool worker that its own computation needs.
    let mut rows: Vec<Row> = if cli.time_limit.is_some() {
        cells.iter().map(make_row).collect()
    } else {
        cells.par_iter().map(make_row).collect()
    };
    sort_rows(&mut rows);

    let text = render(&rows, cli.format);
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                return usage(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{text}"),
    }

    let usage_error = analyses.iter().any(|a| a.is_err()) || rows.iter().any(is_budget);
    let uncertified = rows.iter().any(|r| {
        r.bound.as_ref().is_some_and(|b| !b.certified) || (r.error.is_some() && !is_timeout(r))
    });
    if usage_error {
        ExitCode::from(1)
    } else if uncertified {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn is_budget(r: &Row) -> bool {
    r.error
        .as_deref()
        .is_some_and(|e| e.contains("exceed the budget"))
}

fn is_timeout(r: &Row) -> bool {
    r.error.as_deref() == Some("time limit exceeded")
}
