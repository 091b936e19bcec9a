//! Acceptance suite: one PASS/FAIL line per criterion, then a summary.
//!
//! Every criterion is evaluated and reported; the process exits 0 so the
//! remaining test targets still run. Failing lines are the signal.

use std::process::Command;
use std::time::{Duration, Instant};

use fpsdp::bench::flops::{flop_estimate, matches_two_digits};
use fpsdp::bench::registry::{Benchmark, BENCHMARKS};
use fpsdp::bench::sampling::sample_lower_bound;
use fpsdp::expr::parse_expr;
use fpsdp::float::{rational_from_f64, Precision, Rational};
use fpsdp::geneig::geneig_bound;
use fpsdp::interval::BoxDomain;
use fpsdp::linalg::{full_rank_factorization, gen_eig_max, to_f64_matrix};
use fpsdp::moments::{linear_functional, localizing_matrix, moment_matrix};
use fpsdp::mvbeta::{mvbeta_bound, DEFAULT_BUDGET};
use fpsdp::pipeline::{Analysis, BoundReport, FpsdpOptions, Method};
use fpsdp::poly::Polynomial;
use fpsdp::robsdp::robsdp_for;
use fpsdp::rounding::{concrete_run, RoundingOptions};
use nalgebra::DMatrix;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HIERARCHIES: [Method; 3] = [Method::Geneig, Method::Mvbeta, Method::Robsdp];

struct Outcome {
    passed: usize,
    failed: usize,
}

impl Outcome {
    fn report(&mut self, id: &str, title: &str, pass: bool, detail: impl AsRef<str>) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {title}: {}", detail.as_ref());
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `y1^2 y2 + 3 y1 - 2/3` on the unit square.
fn sample_poly() -> Polynomial {
    Polynomial::from_terms(
        2,
        [
            (vec![2, 1], q(1, 1)),
            (vec![1, 0], q(3, 1)),
            (vec![0, 0], q(-2, 3)),
        ],
    )
}

fn criterion_1(out: &mut Outcome) {
    let t = Instant::now();
    let unit = BoxDomain::unit(2);
    let expect = |rows: [[(i64, i64); 3]; 3]| {
        fpsdp::linalg::RationalMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&(a, b)| q(a, b)).collect())
                .collect(),
        )
    };
    let m1 = localizing_matrix(&Polynomial::one(2), 1, &unit);
    let mp = localizing_matrix(&sample_poly(), 1, &unit);
    let y2sq = Polynomial::from_terms(2, [(vec![0, 2], q(1, 1))]);
    let ok =
        m1 == expect([
            [(1, 1), (1, 2), (1, 2)],
            [(1, 2), (1, 3), (1, 4)],
            [(1, 2), (1, 4), (1, 3)],
        ]) && mp
            == expect([
                [(1, 1), (19, 24), (19, 36)],
                [(19, 24), (113, 180), (5, 12)],
                [(19, 36), (5, 12), (13, 36)],
            ])
            && linear_functional(&(&sample_poly() * &y2sq), &unit) == q(13, 36);
    let secs = t.elapsed().as_secs_f64();
    out.report(
        "1",
        "exact moment and localizing matrices of the sample polynomial",
        ok && secs < 1.0,
        format!("exact={ok}, {secs:.3}s"),
    );
}

fn criterion_2(out: &mut Outcome) {
    let t = Instant::now();
    let targets = [
        (1, 0.82, 0.01),
        (2, 1.43, 0.01),
        (3, 1.83, 0.01),
        (20, 2.72, 0.02),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, want, tol) in targets {
        match geneig_bound(&sample_poly(), &BoxDomain::unit(2), k) {
            Ok(r) => {
                ok &= (r.bound - want).abs() <= tol;
                parts.push(format!("k={k}: {:.4} (want {want}±{tol})", r.bound));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("k={k}: {e}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.report(
        "2",
        "geneig sequence on the sample polynomial",
        ok && secs <= 120.0,
        format!("{}; {secs:.1}s", parts.join(", ")),
    );
}

fn criterion_3(out: &mut Outcome) {
    let t = Instant::now();
    let targets = [
        (1, 0.52, 0.01),
        (2, 0.95, 0.01),
        (3, 1.25, 0.01),
        (20, 2.42, 0.02),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, want, tol) in targets {
        match mvbeta_bound(&sample_poly(), &BoxDomain::unit(2), k, DEFAULT_BUDGET) {
            Ok(r) => {
                ok &= (r.bound - want).abs() <= tol;
                parts.push(format!("k={k}: {:.4} (want {want}±{tol})", r.bound));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("k={k}: {e}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    out.report(
        "3",
        "mvbeta sequence on the sample polynomial",
        ok && secs <= 120.0,
        format!("{}; {secs:.1}s", parts.join(", ")),
    );
}

fn criterion_4(out: &mut Outcome) {
    let t = Instant::now();
    let mut total = 0;
    let mut misses = Vec::new();
    for b in &BENCHMARKS {
        for row in b.flops {
            for (method, printed) in [
                (Method::Geneig, row.geneig),
                (Method::Mvbeta, row.mvbeta),
                (Method::Robsdp, row.robsdp),
            ] {
                total += 1;
                let est =
                    flop_estimate(method, b.n as u64, b.expected_m as u64, row.k as u64).unwrap();
                if !matches_two_digits(est, printed) {
                    misses.push(format!(
                        "{} {method} k={}: {est} vs {printed:e}",
                        b.id, row.k
                    ));
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let detail = if misses.is_empty() {
        format!("{total}/{total} match, {secs:.3}s")
    } else {
        misses.join("; ")
    };
    out.report(
        "4",
        "flop estimates to two significant digits",
        misses.is_empty() && total == 54 && secs < 1.0,
        detail,
    );
}

/// Bound reports for one benchmark, keyed by method and order.
struct BenchRuns {
    bench: &'static Benchmark,
    analysis: Analysis,
    cells: Vec<(Method, u32, Result<BoundReport, String>)>,
}

impl BenchRuns {
    fn get(&self, method: Method, k: u32) -> Option<&BoundReport> {
        self.cells
            .iter()
            .find(|c| c.0 == method && c.1 == k)
            .and_then(|c| c.2.as_ref().ok())
    }
}

fn run_orders(bench: &'static Benchmark, orders: &[u32]) -> BenchRuns {
    let analysis = Analysis::new(
        &bench.tree(),
        &bench.domain(),
        Precision::Double,
        RoundingOptions::default(),
    )
    .expect("benchmark analyzes");
    let opts = FpsdpOptions::default();
    let mut cells = Vec::new();
    for &method in &HIERARCHIES {
        for &k in orders {
            cells.push((
                method,
                k,
                analysis.bound(method, k, &opts).map_err(|e| e.to_string()),
            ));
        }
    }
    for method in [Method::Sample, Method::AbsSum] {
        cells.push((
            method,
            0,
            analysis.bound(method, 0, &opts).map_err(|e| e.to_string()),
        ));
    }
    BenchRuns {
        bench,
        analysis,
        cells,
    }
}

/// Runs one cell in a child process so a slow cell can be abandoned cleanly.
fn run_limited(bench: &str, method: Method, k: u32, limit: Duration) -> Option<BoundReport> {
    let out = Command::new(env!("CARGO_BIN_EXE_fpsdp"))
        .args([
            "--bench",
            bench,
            "--method",
            method.name(),
            "--order",
            &k.to_string(),
            "--format",
            "json",
        ])
        .args(["--time-limit", &limit.as_secs_f64().to_string()])
        .output()
        .ok()?;
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).ok()?;
    let row = v["rows"].get(0)?;
    let b = &row["bound"];
    if b.is_null() {
        return None;
    }
    Some(BoundReport {
        method,
        k,
        precision: Precision::Double,
        n: row["n"].as_u64()? as usize,
        m: row["m"].as_u64()? as usize,
        l_upper: b["l_upper"].as_f64()?,
        l_lower: b["l_lower"].as_f64()?,
        l_k: b["l_k"].as_f64()?,
        h_bar: b["h_bar"].as_f64()?,
        final_bound: b["final_bound"].as_f64()?,
        residuals: b["residuals"]
            .as_array()?
            .iter()
            .filter_map(|r| r.as_f64())
            .collect(),
        certified: b["certified"].as_bool()?,
        note: String::new(),
        timings: Default::default(),
    })
}

fn criterion_5(out: &mut Outcome, runs: &[BenchRuns]) {
    let t = Instant::now();
    let find = |id: &str| {
        runs.iter()
            .find(|r| r.bench.id == id)
            .expect("benchmark ran")
    };
    let g = find("g");
    let g8 = g
        .analysis
        .bound(Method::Robsdp, 8, &FpsdpOptions::default())
        .ok();
    let spots: [(&str, Method, u32, Option<&BoundReport>); 6] = [
        ("g", Method::Geneig, 1, g.get(Method::Geneig, 1)),
        ("g", Method::Mvbeta, 1, g.get(Method::Mvbeta, 1)),
        ("g", Method::Robsdp, 1, g.get(Method::Robsdp, 1)),
        ("g", Method::Robsdp, 8, g8.as_ref()),
        ("a", Method::Robsdp, 1, find("a").get(Method::Robsdp, 1)),
        ("i", Method::Robsdp, 1, find("i").get(Method::Robsdp, 1)),
    ];
    let mut seconds = t.elapsed().as_secs_f64();
    for (id, method, k, report) in spots {
        let bench = find(id).bench;
        let want = bench.reference(method, k).expect("reference value present");
        let title = format!("{id} {method} k={k} against {want:.2e}");
        let Some(r) = report else {
            out.report("5", &title, false, "no result");
            continue;
        };
        seconds += r.timings.total;
        if bench.m_matches() {
            let d = rel(r.final_bound, want);
            out.report(
                "5",
                &title,
                d <= 0.15,
                format!(
                    "{:.3e}, relative deviation {:.1}%",
                    r.final_bound,
                    100.0 * d
                ),
            );
        } else {
            let ok = r.final_bound > 0.0 && r.final_bound <= bench.upper;
            out.report(
                "5",
                &title,
                ok,
                format!(
                    "{:.3e} in (0, {:.2e}] (error-variable count differs)",
                    r.final_bound, bench.upper
                ),
            );
        }
    }
    out.report(
        "5",
        "spot values total runtime",
        seconds <= 600.0,
        format!("{seconds:.1}s"),
    );
}

fn criterion_6a(out: &mut Outcome, runs: &mut [BenchRuns]) {
    let tol = |a: f64, b: f64| 1e-9 * a.abs().max(b.abs()) + 1e-30;
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut third = Vec::new();
    for method in HIERARCHIES {
        // Cheapest first; once one instance times out, larger ones are not attempted.
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.sort_by_key(|&i| {
            flop_estimate(
                method,
                runs[i].analysis.n() as u64,
                runs[i].analysis.m() as u64,
                3,
            )
        });
        let mut gave_up = false;
        for i in order {
            let r = &mut runs[i];
            let mut seq: Vec<(u32, BoundReport)> = (1..=2)
                .filter_map(|k| r.get(method, k).map(|b| (k, b.clone())))
                .collect();
            if !gave_up {
                let limit = Duration::from_secs(60);
                let t = Instant::now();
                match run_limited(r.bench.id, method, 3, limit) {
                    Some(b3) => {
                        third.push(format!("{}/{method}", r.bench.id));
                        seq.push((3, b3.clone()));
                        r.cells.push((method, 3, Ok(b3)));
                    }
                    // Budget and size refusals return at once; only a timeout ends the sweep.
                    None => gave_up = t.elapsed() >= limit,
                }
            }
            for w in seq.windows(2) {
                let ((k0, a), (k1, b)) = (&w[0], &w[1]);
                checked += 1;
                if a.l_upper > b.l_upper + tol(a.l_upper, b.l_upper)
                    || a.l_lower < b.l_lower - tol(a.l_lower, b.l_lower)
                {
                    violations.push(format!("{} {method} k={k0}->{k1}", r.bench.id));
                }
            }
        }
    }
    out.report(
        "6a",
        "monotone in the order for every hierarchy",
        violations.is_empty() && checked > 0,
        format!(
            "{checked} steps checked, order 3 reached for {}; violations: {:?}",
            third.join(" "),
            violations
        ),
    );
}

fn criterion_6b(out: &mut Outcome, runs: &[BenchRuns]) {
    let mut above = Vec::new();
    let mut count = 0;
    for r in runs {
        for (method, k, res) in &r.cells {
            if let Ok(b) = res {
                count += 1;
                if b.final_bound > r.bench.upper {
                    above.push(format!(
                        "{} {method} k={k}: {:.3e} > {:.2e}",
                        r.bench.id, b.final_bound, r.bench.upper
                    ));
                }
            }
        }
    }
    out.report(
        "6b",
        "final bounds never exceed the certified upper bounds",
        above.is_empty(),
        format!("{count} bounds; {above:?}"),
    );
}

/// `max_sigma` of the largest eigenvalue of `sum sigma_j M_k(eps s_j z)` relative to `M_k(z)`.
fn vertex_value(s: &[Polynomial], domain: &BoxDomain, eps: &Rational, k: u32) -> f64 {
    let mk = to_f64_matrix(&moment_matrix(k, domain));
    let blocks: Vec<DMatrix<f64>> = s
        .iter()
        .map(|sj| to_f64_matrix(&localizing_matrix(&sj.scale(eps), k, domain)))
        .collect();
    (0..1u32 << s.len())
        .map(|mask| {
            let b = blocks.iter().enumerate().fold(
                DMatrix::zeros(mk.nrows(), mk.ncols()),
                |acc, (j, bj)| {
                    if mask >> j & 1 == 1 {
                        acc - bj
                    } else {
                        acc + bj
                    }
                },
            );
            gen_eig_max(&b, &mk).expect("moment matrix is definite")
        })
        .fold(0.0, f64::max)
}

fn criterion_6c(out: &mut Outcome) {
    let x = Polynomial::var(1, 0);
    let one = Polynomial::one(1);
    let half = Polynomial::constant(1, q(1, 2));
    let unit = BoxDomain::unit(1);
    let y = [Polynomial::var(2, 0), Polynomial::var(2, 1)];
    let sq = BoxDomain::new(vec![q(-1, 1), q(0, 1)], vec![q(1, 1), q(2, 1)]);
    let cases: Vec<(&str, Vec<Polynomial>, BoxDomain, Rational, u32)> = vec![
        ("x on [0,1]", vec![x.clone()], unit.clone(), q(1, 1), 1),
        ("x on [0,1], k=2", vec![x.clone()], unit.clone(), q(1, 1), 2),
        (
            "x, 1-x^2",
            vec![x.clone(), &one - &(&x * &x)],
            unit.clone(),
            q(1, 4),
            2,
        ),
        ("x - 1/2", vec![&x - &half], unit.clone(), q(1, 1), 1),
        (
            "y1 y2, y1 - y2",
            vec![&y[0] * &y[1], &y[0] - &y[1]],
            sq,
            q(1, 8),
            1,
        ),
    ];
    let mut all_ok = true;
    let mut parts = Vec::new();
    for (name, s, domain, eps, k) in cases {
        let total: Rational = s
            .iter()
            .map(|sj| fpsdp::interval::ia_bound(sj, &domain))
            .sum::<Rational>()
            * &eps;
        let hi = fpsdp::float::to_f64(&total, fpsdp::float::RoundMode::Up);
        let r = robsdp_for(&s, &domain, &eps, k, hi).expect("robsdp runs");
        let oracle = vertex_value(&s, &domain, &eps, k);
        let d = rel(r.bound, oracle);
        all_ok &= d <= 1e-6;
        parts.push(format!("{name}: {:.7} vs {:.7}", r.bound, oracle));
    }
    let analytic = (3.0 + 3f64.sqrt()) / 6.0;
    let r = robsdp_for(&[x], &BoxDomain::unit(1), &q(1, 1), 1, 1.0).expect("robsdp runs");
    let analytic_ok = rel(r.bound, analytic) <= 1e-6;
    parts.push(format!("analytic {:.7} vs {analytic:.7}", r.bound));
    out.report(
        "6c",
        "robsdp equals the vertex oracle for m <= 2",
        all_ok && analytic_ok,
        parts.join("; "),
    );
}

fn criterion_6de(out: &mut Outcome, runs: &[BenchRuns]) {
    let mut uncertified = Vec::new();
    let mut negative = Vec::new();
    let mut count = 0;
    for r in runs {
        for (method, k, res) in &r.cells {
            let Ok(b) = res else { continue };
            count += 1;
            if !b.certified {
                uncertified.push(format!(
                    "{} {method} k={k} residuals {:?}",
                    r.bench.id, b.residuals
                ));
            }
            if b.final_bound.is_nan() || b.final_bound < 0.0 {
                negative.push(format!("{} {method} k={k}", r.bench.id));
            }
        }
    }
    out.report(
        "6d",
        "returned certificates verify after correction",
        uncertified.is_empty(),
        format!("{count} bounds; {uncertified:?}"),
    );
    out.report(
        "6e",
        "final bounds are nonnegative",
        negative.is_empty(),
        format!("{count} bounds; {negative:?}"),
    );
}

fn criterion_7(out: &mut Outcome) {
    let eps = Precision::Double.epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = Vec::new();
    let mut runs = 0;
    for b in &BENCHMARKS {
        let tree = b.tree();
        let d = b.domain();
        let lo: Vec<f64> =
            d.lo.iter()
                .map(fpsdp::float::to_f64_nearest)
                .collect();
        let hi: Vec<f64> =
            d.hi.iter()
                .map(|v| fpsdp::float::to_f64_nearest(v))
                .collect();
        for _ in 0..10_000 {
            let x: Vec<Rational> = lo
                .iter()
                .zip(&hi)
                .map(|(&a, &c)| rational_from_f64(rng.random_range(a..=c)))
                .collect();
            let run = concrete_run(
                &tree,
                b.n,
                Precision::Double,
                RoundingOptions::default(),
                &x,
            );
            runs += 1;
            if run.deltas.len() != b.expected_m || run.deltas.iter().any(|e| e.abs() > eps) {
                bad.push(b.id);
                break;
            }
        }
    }
    let halve = parse_expr("x1/2", 1).unwrap();
    let one_two = BoxDomain::new(vec![q(1, 1)], vec![q(2, 1)]);
    let s = sample_lower_bound(&halve, &one_two, Precision::Double, 100_000, 0).value;
    out.report(
        "7",
        "concrete relative errors lie in [-eps, eps]; halving samples to zero",
        bad.is_empty() && s == 0.0,
        format!("{runs} runs, offending benchmarks {bad:?}, halving sample bound {s:e}"),
    );
}

fn criterion_8(out: &mut Outcome, runs: &[BenchRuns]) {
    let eps = Precision::Double.epsilon();
    let mut blocks = 0;
    let mut bad = Vec::new();
    for r in runs {
        for k in 1..=2 {
            for (j, s) in r.analysis.linear.s.iter().enumerate() {
                let m = localizing_matrix(&s.scale(&eps), k, &r.analysis.domain);
                let f = full_rank_factorization(&m);
                blocks += 1;
                if f.reconstruct() != m {
                    bad.push(format!("{} k={k} j={j}", r.bench.id));
                }
            }
        }
    }
    out.report(
        "8",
        "localizing blocks equal 2 L R exactly",
        bad.is_empty(),
        format!("{blocks} blocks; mismatches {bad:?}"),
    );
}

fn main() {
    let start = Instant::now();
    let mut out = Outcome {
        passed: 0,
        failed: 0,
    };
    criterion_1(&mut out);
    criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);
    let mut runs: Vec<BenchRuns> = BENCHMARKS.iter().map(|b| run_orders(b, &[1, 2])).collect();
    criterion_5(&mut out, &runs);
    criterion_6a(&mut out, &mut runs);
    criterion_6b(&mut out, &runs);
    criterion_6c(&mut out);
    criterion_6de(&mut out, &runs);
    criterion_7(&mut out);
    criterion_8(&mut out, &runs);
    println!(
        "acceptance: {} passed, {} failed, {:.0}s",
        out.passed,
        out.failed,
        start.elapsed().as_secs_f64()
    );
}
