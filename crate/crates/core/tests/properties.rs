//! Randomized invariants across the pipeline.

use fpsdp::bench::sampling::sample_lower_bound;
use fpsdp::expr::{parse_expr, Constant, Expr};
use fpsdp::float::{Precision, Rational};
use fpsdp::geneig::geneig_bound;
use fpsdp::interval::{ia_bound, interval_eval, BoxDomain};
use fpsdp::linalg::{
    full_rank_factorization, gen_eig_max, jacobi_eig, sym_eig, to_f64_matrix, RationalMatrix,
};
use fpsdp::moments::{beta_moment_ratio, linear_functional, localizing_matrix, moment_matrix};
use fpsdp::mvbeta::{mvbeta_bound, quotient_sum, DEFAULT_BUDGET};
use fpsdp::pipeline::{Analysis, FpsdpOptions, Method};
use fpsdp::poly::Polynomial;
use fpsdp::robsdp::robsdp_for;
use fpsdp::rounding::{concrete_run, round_expression, RoundingOptions};
use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Polynomials in two variables of degree at most 2 per variable.
fn poly2() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((0u16..=2, 0u16..=2, -6i64..=6, 1i64..=4), 1..6).prop_map(|ts| {
        Polynomial::from_terms(2, ts.into_iter().map(|(a, b, n, d)| (vec![a, b], q(n, d))))
    })
}

/// Boxes in two variables with small rational corners and positive widths.
fn box2() -> impl Strategy<Value = BoxDomain> {
    prop::collection::vec((-4i64..=4, 1i64..=3, 1i64..=6), 2).prop_map(|v| {
        let lo: Vec<Rational> = v.iter().map(|&(a, d, _)| q(a, d)).collect();
        let hi: Vec<Rational> = v
            .iter()
            .zip(&lo)
            .map(|(&(_, d, w), l)| l + q(w, d))
            .collect();
        BoxDomain::new(lo, hi)
    })
}

/// A point of `b` given fractions in `[0, 1]`.
fn point_in(b: &BoxDomain, t: &[(i64, i64)]) -> Vec<Rational> {
    (0..b.dim())
        .map(|i| &b.lo[i] + b.width(i) * q(t[i].0, t[i].1))
        .collect()
}

fn fractions(n: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((1i64..=16).prop_flat_map(|d| (0..=d, Just(d))), n)
}

/// Straight-line programs over three inputs.
fn program() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::Var),
        (-3i64..=5).prop_map(Expr::constant),
        Just(Expr::Const(
            Constant::decimal("0.1", Precision::Double).unwrap()
        )),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), 2i64..=3)
                .prop_map(|(a, c)| Expr::Div(Box::new(a), Constant::integer(c))),
            (inner, 2u32..=3).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
        ]
    })
}

fn program_box() -> BoxDomain {
    BoxDomain::new(
        vec![q(1, 1), q(-2, 1), q(1, 2)],
        vec![q(2, 1), q(3, 1), q(7, 2)],
    )
}

/// Pivots of the exact `LDL^T` elimination without pivoting.
fn exact_pivots(m: &RationalMatrix) -> Vec<Rational> {
    let n = m.rows();
    let mut a: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    let mut pivots = Vec::new();
    for p in 0..n {
        let d = a[p][p].clone();
        pivots.push(d.clone());
        if d.is_zero() {
            break;
        }
        for i in p + 1..n {
            let f = &a[i][p] / &d;
            for j in p..n {
                let t = &f * &a[p][j];
                a[i][j] -= t;
            }
        }
    }
    pivots
}

/// Rank by fraction-free (Bareiss) elimination with row swaps.
fn bareiss_rank(m: &RationalMatrix) -> usize {
    // Clear denominators row by row; rank is unchanged.
    let mut a: Vec<Vec<num_bigint::BigInt>> = (0..m.rows())
        .map(|i| {
            let lcm = (0..m.cols()).fold(num_bigint::BigInt::one(), |acc, j| {
                num_integer::Integer::lcm(&acc, m.get(i, j).denom())
            });
            (0..m.cols())
                .map(|j| (m.get(i, j) * Rational::from_integer(lcm.clone())).to_integer())
                .collect()
        })
        .collect();
    let (rows, cols) = (m.rows(), m.cols());
    let mut prev = num_bigint::BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..rows {
            for j in c + 1..cols {
                a[i][j] = (&a[rank][c] * &a[i][j] - &a[i][c] * &a[rank][j]) / &prev;
            }
            a[i][c] = num_bigint::BigInt::zero();
        }
        prev = a[rank][c].clone();
        rank += 1;
    }
    rank
}

/// `int_0^1 y^a (1 - y)^b dy` by binomial expansion.
fn beta_integral(a: u64, b: u64) -> Rational {
    let mut total = Rational::zero();
    let mut binom = num_bigint::BigInt::one();
    for t in 0..=b {
        let term = Rational::new(binom.clone(), (a + t + 1).into());
        if t % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        binom = binom * (b - t) / (t + 1);
    }
    total
}

fn sym_from(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut it = v.iter();
    for i in 0..n {
        for j in i..n {
            let x = *it.next().unwrap();
            a[(i, j)] = x;
            a[(j, i)] = x;
        }
    }
    a
}

/// `max_sigma` of the largest generalized eigenvalue of `sum sigma_j M_k(eps s_j z)` against `M_k(z)`.
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
            gen_eig_max(&b, &mk).unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn robsdp_and_oracle(
    s: &[Polynomial],
    b: &BoxDomain,
    k: u32,
) -> (fpsdp::robsdp::RobsdpResult, f64, f64) {
    let eps = q(1, 8);
    let total = s
        .iter()
        .fold(Rational::zero(), |acc, sj| acc + ia_bound(sj, b))
        * &eps;
    let lambda_hi = fpsdp::float::to_f64(&total, fpsdp::float::RoundMode::Up).max(1e-300);
    let r = robsdp_for(s, b, &eps, k, lambda_hi).unwrap();
    (r, vertex_value(s, b, &eps, k).max(0.0), lambda_hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printing_and_parsing_round_trip(p in poly2()) {
        let back = parse_expr(&p.to_expr_string(), 2).unwrap().expand(2);
        prop_assert_eq!(back, p);
    }

    #[test]
    fn leibniz_rule(p in poly2(), r in poly2(), i in 0usize..2) {
        let lhs = (&p * &r).differentiate(i);
        let rhs = &(&p.differentiate(i) * &r) + &(&p * &r.differentiate(i));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn expansion_preserves_values(e in program(), t in fractions(3)) {
        let x = point_in(&program_box(), &t);
        prop_assert_eq!(e.expand(3).eval_rational(&x), e.eval_rational(&x));
    }

    #[test]
    fn interval_enclosure_contains_values(p in poly2(), b in box2(), t in fractions(2)) {
        let x = point_in(&b, &t);
        let v = p.eval_rational(&x);
        prop_assert!(interval_eval(&p, &b).contains(&v));
        prop_assert!(ia_bound(&p, &b) >= v.abs());
    }

    #[test]
    fn moment_matrices_are_positive_definite(b in box2(), k in 0u32..=2) {
        let pivots = exact_pivots(&moment_matrix(k, &b));
        prop_assert!(pivots.iter().all(|d| d.is_positive()));
    }

    #[test]
    fn localizing_matrices_are_linear(p in poly2(), r in poly2(), a in -5i64..=5, c in -5i64..=5, b in box2()) {
        let (qa, qc) = (q(a, 1), q(c, 1));
        let combo = &p.scale(&qa) + &r.scale(&qc);
        let lhs = localizing_matrix(&combo, 1, &b);
        let rhs = localizing_matrix(&p, 1, &b).scale(&qa).add(&localizing_matrix(&r, 1, &b).scale(&qc));
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(linear_functional(&combo, &b), linear_functional(&p, &b) * &qa + linear_functional(&r, &b) * &qc);
    }

    #[test]
    fn squares_have_nonnegative_moments(p in poly2(), b in box2()) {
        let sq = &p * &p;
        prop_assert!(!linear_functional(&sq, &b).is_negative());
        let m = to_f64_matrix(&localizing_matrix(&sq, 1, &b));
        let (vals, _) = sym_eig(&m).unwrap();
        prop_assert!(vals[0] >= -1e-9 * vals.last().unwrap().abs().max(1.0));
    }

    #[test]
    fn beta_ratio_matches_direct_integrals(eta in prop::collection::vec(0u16..4, 2), beta in prop::collection::vec(0u16..4, 2), alpha in prop::collection::vec(0u16..4, 2)) {
        let mut expected = Rational::one();
        for i in 0..2 {
            let (e, b, a) = (eta[i] as u64, beta[i] as u64, alpha[i] as u64);
            expected *= beta_integral(e + a, b) / beta_integral(e, b);
        }
        prop_assert_eq!(beta_moment_ratio(&eta, &beta, &alpha), expected);
    }

    #[test]
    fn eigendecomposition_reconstructs(v in prop::collection::vec(-10.0f64..10.0, 10)) {
        let a = sym_from(&v, 4);
        let (vals, vecs) = sym_eig(&a).unwrap();
        let rebuilt = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * vecs.transpose();
        prop_assert!((rebuilt - &a).amax() < 1e-10);
        let (jvals, _) = jacobi_eig(&a).unwrap();
        for (x, y) in vals.iter().zip(&jvals) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn generalized_eigenvalue_is_congruence_invariant(bv in prop::collection::vec(-5.0f64..5.0, 6), g in prop::collection::vec(-2.0f64..2.0, 9), c in prop::collection::vec(-2.0f64..2.0, 9)) {
        let b = sym_from(&bv, 3);
        let gm = DMatrix::from_row_slice(3, 3, &g);
        let a = &gm * gm.transpose() + DMatrix::identity(3, 3);
        let cm = DMatrix::from_row_slice(3, 3, &c) + DMatrix::identity(3, 3) * 5.0;
        let base = gen_eig_max(&b, &a).unwrap();
        let moved = gen_eig_max(&(&cm * &b * cm.transpose()), &(&cm * &a * cm.transpose())).unwrap();
        prop_assert!((base - moved).abs() < 1e-8 * base.abs().max(1.0));
    }

    #[test]
    fn exact_rank_agrees_with_fraction_free_elimination(g in prop::collection::vec(-3i64..=3, 8), d in prop::collection::vec(-2i64..=2, 2)) {
        // M = G^T D G with G of size 2 x 4 has rank at most 2.
        let gm = RationalMatrix::from_rows((0..2).map(|i| (0..4).map(|j| q(g[4 * i + j], 1)).collect()).collect());
        let dm = RationalMatrix::from_rows((0..2).map(|i| (0..2).map(|j| if i == j { q(d[i], 1) } else { Rational::zero() }).collect()).collect());
        let m = gm.transpose().mul(&dm).mul(&gm);
        let f = full_rank_factorization(&m);
        prop_assert_eq!(f.rank, bareiss_rank(&m));
        prop_assert_eq!(f.reconstruct(), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn geneig_is_monotone_sound_and_shift_equivariant(p in poly2(), b in box2(), c in -4i64..=4) {
        let upper = interval_eval(&p, &b).hi;
        let mean = linear_functional(&p, &b) / b.volume();
        let r1 = geneig_bound(&p, &b, 1).unwrap();
        let r2 = geneig_bound(&p, &b, 2).unwrap();
        let scale = fpsdp::float::to_f64_nearest(&upper.abs()).max(1.0);
        prop_assert!(r1.bound <= r2.bound + 1e-9 * scale);
        prop_assert!(r2.bound <= fpsdp::float::to_f64_nearest(&upper) + 1e-9 * scale);
        prop_assert!(r1.bound >= fpsdp::float::to_f64_nearest(&mean) - 1e-9 * scale);
        let shifted = geneig_bound(&(&p + &Polynomial::constant(2, q(c, 1))), &b, 1).unwrap();
        prop_assert!((shifted.bound - r1.bound - c as f64).abs() < 1e-8 * scale);
    }

    #[test]
    fn mvbeta_is_monotone_and_dominates_the_mean(p in poly2(), b in box2()) {
        let mean = linear_functional(&p, &b) / b.volume();
        prop_assert_eq!(&quotient_sum(&p, &b, &[0, 0], &[0, 0]), &mean);
        let r1 = mvbeta_bound(&p, &b, 1, DEFAULT_BUDGET).unwrap();
        let r2 = mvbeta_bound(&p, &b, 2, DEFAULT_BUDGET).unwrap();
        prop_assert!(mean <= r1.exact && r1.exact <= r2.exact);
        prop_assert!(r2.exact <= interval_eval(&p, &b).hi);
        prop_assert_eq!(quotient_sum(&p, &b, &r2.eta, &r2.beta), r2.exact);
    }

    #[test]
    fn robsdp_never_undercuts_the_vertex_oracle(s in prop::collection::vec(poly2(), 1..=2), b in box2(), k in 1u32..=2) {
        let (r, oracle, lambda_hi) = robsdp_and_oracle(&s, &b, k);
        prop_assert!(r.bound >= 0.0);
        prop_assert!(r.bound <= lambda_hi * (1.0 + 1e-12) + 1e-300);
        if !r.capped {
            prop_assert!(r.bound >= oracle * (1.0 - 1e-6) - 1e-12, "robsdp {} vs vertices {}", r.bound, oracle);
        }
    }

    #[test]
    fn robsdp_matches_vertex_oracle_on_semidefinite_blocks(ps in prop::collection::vec((poly2(), any::<bool>()), 1..=2), b in box2(), k in 1u32..=2) {
        // s_j = +-p_j^2 keeps every localizing block semidefinite.
        let s: Vec<Polynomial> = ps.iter().map(|(p, neg)| if *neg { -(p * p) } else { p * p }).collect();
        let (r, oracle, _) = robsdp_and_oracle(&s, &b, k);
        if !r.capped {
            prop_assert!((r.bound - oracle).abs() <= 1e-6 * oracle.max(1e-12), "robsdp {} vs vertices {}", r.bound, oracle);
        }
    }

    #[test]
    fn residual_splits_and_vanishes_without_errors(e in program(), t in fractions(3)) {
        let rp = round_expression(&e, 3, Precision::Double, RoundingOptions::default());
        let lin = rp.linear();
        let h = rp.remainder(&lin.l);
        prop_assert_eq!(&(&lin.l + &h), &rp.residual);
        let mut x = point_in(&program_box(), &t);
        x.extend(std::iter::repeat_n(Rational::zero(), rp.m));
        prop_assert!(rp.residual.eval_rational(&x).is_zero());
        prop_assert!(h.eval_rational(&x).is_zero());
    }

    #[test]
    fn concrete_errors_are_bounded_and_reproduce_the_model(e in program(), t in fractions(3)) {
        let x = point_in(&program_box(), &t);
        let rp = round_expression(&e, 3, Precision::Double, RoundingOptions::default());
        let run = concrete_run(&e, 3, Precision::Double, RoundingOptions::default(), &x);
        let eps = Precision::Double.epsilon();
        prop_assert_eq!(run.deltas.len(), rp.m);
        prop_assert!(run.deltas.iter().all(|d| d.abs() <= eps));
        let mut pt = x.clone();
        pt.extend(run.deltas.iter().cloned());
        prop_assert_eq!(rp.residual.eval_rational(&pt), &run.float_result - &run.exact_result);
    }

    #[test]
    fn final_bounds_are_nonnegative_and_below_the_linear_bound(e in program(), k in 1u32..=2) {
        let a = Analysis::new(&e, &program_box(), Precision::Double, RoundingOptions::default()).unwrap();
        let opts = FpsdpOptions { samples: 2000, search_budget: 2000, ..FpsdpOptions::default() };
        for method in [Method::Geneig, Method::Mvbeta, Method::Robsdp, Method::AbsSum] {
            match a.bound(method, k, &opts) {
                Ok(r) => {
                    prop_assert!(r.final_bound >= 0.0);
                    prop_assert!(r.final_bound <= r.l_k.max(0.0));
                }
                Err(err) => prop_assert!(err.to_string().contains("budget"), "{err}"),
            }
        }
        let s = a.bound(Method::Sample, 0, &opts).unwrap();
        prop_assert!(s.final_bound >= 0.0);
    }

    #[test]
    fn sampling_is_reproducible(e in program(), seed in 0u64..1000) {
        let b = program_box();
        let first = sample_lower_bound(&e, &b, Precision::Double, 3000, seed);
        let again = sample_lower_bound(&e, &b, Precision::Double, 3000, seed);
        prop_assert_eq!(first.value, again.value);
        prop_assert_eq!(first.argmax, again.argmax);
        prop_assert!(first.value >= 0.0);
    }
}
