//! Empirical lower bound: run the program on random inputs and keep the largest
//! observed error against the exact value.
//!
//! Points are drawn on a `2^-53` grid of the box, rounded to nearest in the
//! working precision and clamped into the box. Each sample is screened with
//! double-double arithmetic carrying a rigorous error bound; samples that might
//! be the maximizer are rescored in exact rationals, so the result is the exact
//! maximum over the drawn points.

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::expr::Expr;
use crate::float::{
    next_down, next_up, rational_from_f64, round_rational, to_f64, to_f64_nearest, Precision,
    Rational, RoundMode,
};
use crate::interval::BoxDomain;

const CHUNK: usize = 4096;
/// Relative accuracy of one double-double operation, with slack.
const DD_U: f64 = 1.0 / (1u64 << 50) as f64 / (1u64 << 48) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    /// Exact maximum rounded toward negative infinity.
    pub value: f64,
    pub exact: Rational,
    pub argmax: Vec<f64>,
    pub samples: usize,
    /// Samples rescored exactly.
    pub rescored: usize,
}

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

impl Dd {
    fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn from_rational(q: &Rational) -> Dd {
        let hi = to_f64_nearest(q);
        let lo = to_f64_nearest(&(q - rational_from_f64(hi)));
        Dd { hi, lo }
    }

    fn abs(self) -> f64 {
        self.hi.abs()
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        quick_two_sum(s, e + self.lo + o.lo)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

/// A value with a bound on its distance to the exact result.
#[derive(Clone, Copy)]
struct Enclosed {
    v: Dd,
    err: f64,
}

/// `|x|` inflated to absorb its own `lo` part and rounding in the bound arithmetic.
fn mag(x: Dd) -> f64 {
    x.abs() * (1.0 + 1e-12) + x.lo.abs()
}

struct Screen<'a> {
    consts: &'a ConstCache,
}

/// Double-double images of the constants, in tree preorder.
struct ConstCache {
    values: Vec<(Dd, f64)>,
}

impl ConstCache {
    fn new(tree: &Expr) -> Self {
        let mut values = Vec::new();
        fn walk(e: &Expr, out: &mut Vec<(Dd, f64)>) {
            match e {
                Expr::Var(_) => {}
                Expr::Const(c) => out.push(const_entry(&c.value)),
                Expr::Neg(a) | Expr::Pow(a, _) => walk(a, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Div(a, c) => {
                    walk(a, out);
                    out.push(const_entry(&c.value.recip()));
                }
            }
        }
        walk(tree, &mut values);
        ConstCache { values }
    }
}

fn const_entry(q: &Rational) -> (Dd, f64) {
    let d = Dd::from_rational(q);
    let err = if d.lo == 0.0 && rational_from_f64(d.hi) == *q {
        0.0
    } else {
        mag(d) * DD_U
    };
    (d, err)
}

/// Sums and products of two error-free doubles are exact in double-double.
fn exact_inputs(a: &Enclosed, b: &Enclosed) -> bool {
    a.err == 0.0 && b.err == 0.0 && a.v.lo == 0.0 && b.v.lo == 0.0
}

impl Screen<'_> {
    fn eval(&self, e: &Expr, x: &[f64], next: &mut usize) -> Enclosed {
        match e {
            Expr::Var(i) => Enclosed {
                v: Dd::from_f64(x[*i]),
                err: 0.0,
            },
            Expr::Const(_) => {
                let (v, err) = self.consts.values[*next];
                *next += 1;
                Enclosed { v, err }
            }
            Expr::Neg(a) => {
                let a = self.eval(a, x, next);
                Enclosed {
                    v: a.v.neg(),
                    err: a.err,
                }
            }
            Expr::Add(a, b) => {
                let (a, b) = (self.eval(a, x, next), self.eval(b, x, next));
                add_enclosed(a, b)
            }
            Expr::Sub(a, b) => {
                let (a, mut b) = (self.eval(a, x, next), self.eval(b, x, next));
                b.v = b.v.neg();
                add_enclosed(a, b)
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.eval(a, x, next), self.eval(b, x, next));
                mul_enclosed(a, b)
            }
            Expr::Div(a, _) => {
                let a = self.eval(a, x, next);
                let (v, err) = self.consts.values[*next];
                *next += 1;
                mul_enclosed(a, Enclosed { v, err })
            }
            Expr::Pow(a, n) => {
                let base = self.eval(a, x, next);
                let mut acc = Enclosed {
                    v: Dd::from_f64(1.0),
                    err: 0.0,
                };
                for _ in 0..*n {
                    acc = mul_enclosed(acc, base);
                }
                acc
            }
        }
    }
}

fn add_enclosed(a: Enclosed, b: Enclosed) -> Enclosed {
    let v = a.v.add(b.v);
    if exact_inputs(&a, &b) {
        return Enclosed { v, err: 0.0 };
    }
    Enclosed {
        v,
        err: (a.err + b.err + (mag(a.v) + mag(b.v)) * DD_U) * (1.0 + 1e-12),
    }
}

fn mul_enclosed(a: Enclosed, b: Enclosed) -> Enclosed {
    let v = a.v.mul(b.v);
    if exact_inputs(&a, &b) {
        return Enclosed { v, err: 0.0 };
    }
    let (ma, mb) = (mag(a.v), mag(b.v));
    Enclosed {
        v,
        err: (ma * b.err + mb * a.err + a.err * b.err + ma * mb * DD_U) * (1.0 + 1e-12),
    }
}

/// Draws input points deterministically from a per-chunk stream.
struct PointSource {
    lo: Vec<Rational>,
    width: Vec<Rational>,
    lo_dd: Vec<Dd>,
    width_dd: Vec<Dd>,
    /// Representable bounds inside the box.
    inner_lo: Vec<f64>,
    inner_hi: Vec<f64>,
    prec: Precision,
}

impl PointSource {
    fn new(domain: &BoxDomain, prec: Precision) -> Self {
        let n = domain.dim();
        let width: Vec<Rational> = (0..n).map(|i| domain.width(i)).collect();
        let bits = prec.bits();
        PointSource {
            lo_dd: domain.lo.iter().map(Dd::from_rational).collect(),
            width_dd: width.iter().map(Dd::from_rational).collect(),
            inner_lo: domain
                .lo
                .iter()
                .map(|q| to_f64(&round_rational(q, bits, RoundMode::Up), RoundMode::Up))
                .collect(),
            inner_hi: domain
                .hi
                .iter()
                .map(|q| to_f64(&round_rational(q, bits, RoundMode::Down), RoundMode::Down))
                .collect(),
            lo: domain.lo.clone(),
            width,
            prec,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.lo.len() {
            let u = rng.random::<u64>() >> 11;
            let x = match self.prec {
                Precision::Double => self
                    .round_fast(i, u)
                    .unwrap_or_else(|| self.round_exact(i, u)),
                Precision::Single => self.round_exact(i, u),
            };
            out.push(x.clamp(self.inner_lo[i], self.inner_hi[i]));
        }
    }

    /// The exact grid point `lo + width u / 2^53` rounded to nearest.
    fn round_exact(&self, i: usize, u: u64) -> f64 {
        let t = Rational::new(u.into(), (1u64 << 53).into());
        let x = &self.lo[i] + &self.width[i] * t;
        to_f64(
            &round_rational(&x, self.prec.bits(), RoundMode::NearestEven),
            RoundMode::NearestEven,
        )
    }

    /// Double-double rounding to nearest; `None` when too close to a tie to decide.
    fn round_fast(&self, i: usize, u: u64) -> Option<f64> {
        let t = Dd::from_f64(u as f64 / (1u64 << 53) as f64);
        let lo = self.lo_dd[i];
        let w = self.width_dd[i];
        let x = lo.add(w.mul(t));
        let err = (mag(lo) + mag(w)) * DD_U * 8.0;
        if x.hi == 0.0 || !x.hi.is_finite() {
            return None;
        }
        let toward = if (x.lo > 0.0) == (x.hi > 0.0) {
            next_up(x.hi.abs()) - x.hi.abs()
        } else {
            x.hi.abs() - next_down(x.hi.abs())
        };
        let half = toward / 2.0;
        if x.lo.abs() + err < half {
            Some(x.hi)
        } else {
            None
        }
    }
}

struct Candidate {
    upper: f64,
    chunk: usize,
    index: usize,
    point: Vec<f64>,
}

struct ChunkOutcome {
    lower: f64,
    candidates: Vec<Candidate>,
}

fn screen_chunk(
    tree: &Expr,
    consts: &ConstCache,
    source: &PointSource,
    prec: Precision,
    seed: u64,
    chunk: usize,
    count: usize,
) -> ChunkOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let screen = Screen { consts };
    let mut point = Vec::with_capacity(source.lo.len());
    let mut lower = 0.0f64;
    let mut candidates: Vec<Candidate> = Vec::new();
    for index in 0..count {
        source.draw(&mut rng, &mut point);
        let fl = tree.eval_float(&point, prec);
        let mut next = 0;
        let exact = screen.eval(tree, &point, &mut next);
        let diff = Dd::from_f64(fl).add(exact.v.neg());
        let exact_diff = exact.err == 0.0 && exact.v.lo == 0.0;
        let err = if exact_diff {
            0.0
        } else {
            (exact.err + (fl.abs() + mag(exact.v)) * DD_U) * (1.0 + 1e-12)
        };
        let d = mag(diff);
        let lo_bound = (diff.abs() - diff.lo.abs()) * (1.0 - 1e-12) - err;
        let upper = d + err;
        if lo_bound > lower {
            lower = lo_bound;
            candidates.retain(|c| c.upper >= lower);
        }
        // A sample that cannot beat the one holding `lower` is dropped.
        if upper > lower || candidates.is_empty() {
            candidates.push(Candidate {
                upper,
                chunk,
                index,
                point: point.clone(),
            });
        }
    }
    ChunkOutcome { lower, candidates }
}

/// Largest `|eval_float(x) - f(x)|` over `n_samples` random points of the box.
pub fn sample_lower_bound(
    tree: &Expr,
    domain: &BoxDomain,
    prec: Precision,
    n_samples: usize,
    seed: u64,
) -> SampleResult {
    assert!(n_samples >= 1, "at least one sample is required");
    let consts = ConstCache::new(tree);
    let source = PointSource::new(domain, prec);
    let chunks = n_samples.div_ceil(CHUNK);
    let outcomes: Vec<ChunkOutcome> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = CHUNK.min(n_samples - c * CHUNK);
            screen_chunk(tree, &consts, &source, prec, seed, c, count)
        })
        .collect();
    let lower = outcomes.iter().map(|o| o.lower).fold(0.0, f64::max);
    let mut candidates: Vec<Candidate> = outcomes
        .into_iter()
        .flat_map(|o| o.candidates)
        .filter(|c| c.upper >= lower)
        .collect();
    candidates.sort_by(|a, b| {
        b.upper
            .total_cmp(&a.upper)
            .then(a.chunk.cmp(&b.chunk))
            .then(a.index.cmp(&b.index))
    });

    let mut best: Option<(Rational, Vec<f64>)> = None;
    let mut rescored = 0;
    for c in candidates {
        if let Some((b, _)) = &best {
            if rational_from_f64(c.upper) <= *b {
                break;
            }
        }
        rescored += 1;
        let e = exact_error(tree, &c.point, prec);
        if best.as_ref().is_none_or(|(b, _)| e > *b) {
            best = Some((e, c.point));
        }
    }
    let (exact, argmax) = best.expect("at least one candidate survives screening");
    SampleResult {
        value: to_f64(&exact, RoundMode::Down),
        exact,
        argmax,
        samples: n_samples,
        rescored,
    }
}

/// `|eval_float(x) - f(x)|` in exact arithmetic.
pub fn exact_error(tree: &Expr, x: &[f64], prec: Precision) -> Rational {
    let fl = rational_from_f64(tree.eval_float(x, prec));
    let xq: Vec<Rational> = x
        .iter()
        .map(|&v| rational_from_f64(prec.round_f64(v)))
        .collect();
    let d = fl - tree.eval_rational(&xq);
    if d.is_negative() {
        -d
    } else {
        d
    }
}

/// Rounds every coordinate of a rational point to the working precision.
pub fn round_point(x: &[Rational], prec: Precision) -> Vec<f64> {
    x.iter()
        .map(|q| {
            to_f64(
                &round_rational(q, prec.bits(), RoundMode::NearestEven),
                RoundMode::NearestEven,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use num_traits::Zero;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn halving_has_no_error() {
        let e = parse_expr("x1/2", 1).unwrap();
        let d = BoxDomain::new(vec![q(1, 1)], vec![q(2, 1)]);
        let r = sample_lower_bound(&e, &d, Precision::Double, 2000, 7);
        assert!(r.exact.is_zero());
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn single_exact_sample() {
        let e = parse_expr("x1*x1", 1).unwrap();
        let d = BoxDomain::new(vec![q(3, 1)], vec![q(3, 1)]);
        let r = sample_lower_bound(&e, &d, Precision::Double, 1, 0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, vec![3.0]);
    }

    #[test]
    fn screening_finds_the_exact_maximum() {
        let e = parse_expr("x1*x2 - 0.1*x1 + x2/3 - x2*x2", 2).unwrap();
        let d = BoxDomain::new(vec![q(-3, 2), q(1, 10)], vec![q(7, 3), q(5, 1)]);
        let n = 3000;
        let r = sample_lower_bound(&e, &d, Precision::Double, n, 11);
        // Brute force over the same points.
        let source = PointSource::new(&d, Precision::Double);
        let mut best = Rational::zero();
        let mut point = Vec::new();
        for c in 0..n.div_ceil(CHUNK) {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            rng.set_stream(c as u64);
            for _ in 0..CHUNK.min(n - c * CHUNK) {
                source.draw(&mut rng, &mut point);
                best = best.max(exact_error(&e, &point, Precision::Double));
            }
        }
        assert_eq!(r.exact, best);
        assert!(r.value > 0.0);
        assert!(r.rescored < n / 10);
    }

    #[test]
    fn fast_rounding_agrees_with_exact() {
        let d = BoxDomain::new(vec![q(4, 1), q(-15, 1)], vec![q(159, 25), q(15, 1)]);
        let s = PointSource::new(&d, Precision::Double);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            for i in 0..2 {
                let u = rng.random::<u64>() >> 11;
                if let Some(x) = s.round_fast(i, u) {
                    assert_eq!(x, s.round_exact(i, u));
                }
            }
        }
    }

    #[test]
    fn points_stay_in_the_box() {
        let d = BoxDomain::new(vec![q(4, 1)], vec![q(159, 25)]);
        for prec in [Precision::Double, Precision::Single] {
            let s = PointSource::new(&d, prec);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut p = Vec::new();
            for _ in 0..500 {
                s.draw(&mut rng, &mut p);
                let x = rational_from_f64(p[0]);
                assert!(d.contains(&[x]));
                assert_eq!(prec.round_f64(p[0]), p[0]);
            }
        }
    }

    #[test]
    fn reproducible_for_a_seed() {
        let e = parse_expr("x1*x1*x1 - x1/3", 1).unwrap();
        let d = BoxDomain::new(vec![q(-2, 1)], vec![q(2, 1)]);
        let a = sample_lower_bound(&e, &d, Precision::Double, 10_000, 42);
        let b = sample_lower_bound(&e, &d, Precision::Double, 10_000, 42);
        assert_eq!(a, b);
    }
}
