//! Multiplicative rounding model of a program and its linear/remainder split.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::expr::{Constant, Expr};
use crate::float::{round_to, Precision, Rational};
use crate::interval::{interval_eval_symmetric_tail, BoxDomain};
use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Neg,
    Add,
    Sub,
    Mul,
    Div,
}

/// What an error variable `e_j` models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ErrorSource {
    /// Rounding of input `x_{var+1}`.
    Input { var: usize },
    /// Rounding of an inexact literal.
    Constant { literal: String },
    /// Rounding of the `ordinal`-th operation in evaluation order.
    Op { op: OpKind, ordinal: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundingOptions {
    /// Give every input variable its own rounding error.
    pub round_inputs: bool,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        RoundingOptions { round_inputs: true }
    }
}

/// Polynomials over `(x_1..x_n, e_1..e_m)`; the first `n` variables are inputs.
#[derive(Debug, Clone)]
pub struct RoundedProgram {
    pub n: usize,
    pub m: usize,
    pub precision: Precision,
    /// Real semantics `f(x)`, over `n` variables.
    pub exact: Polynomial,
    /// Rounded semantics `f^(x, e)`.
    pub approx: Polynomial,
    /// `r = f^ - f`.
    pub residual: Polynomial,
    pub sources: Vec<ErrorSource>,
}

/// Number of error variables the model introduces.
pub fn count_error_vars(tree: &Expr, nvars: usize, opts: RoundingOptions) -> usize {
    let mut seen = vec![false; nvars];
    let mut count = 0;
    count_rec(tree, opts, &mut seen, &mut count);
    count
}

fn count_rec(e: &Expr, opts: RoundingOptions, seen: &mut [bool], count: &mut usize) {
    match e {
        Expr::Var(i) => {
            if opts.round_inputs && !seen[*i] {
                seen[*i] = true;
                *count += 1;
            }
        }
        Expr::Const(c) => {
            if c.is_inexact() {
                *count += 1;
            }
        }
        Expr::Neg(a) | Expr::Div(a, _) => {
            count_rec(a, opts, seen, count);
            *count += 1;
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            count_rec(a, opts, seen, count);
            count_rec(b, opts, seen, count);
            *count += 1;
        }
        Expr::Pow(a, n) => {
            if *n > 0 {
                count_rec(a, opts, seen, count);
                *count += n.saturating_sub(1) as usize;
            }
        }
    }
}

struct Builder {
    n: usize,
    total: usize,
    opts: RoundingOptions,
    var_error: Vec<Option<usize>>,
    sources: Vec<ErrorSource>,
    ordinal: usize,
}

impl Builder {
    fn fresh(&mut self, source: ErrorSource) -> usize {
        let id = self.sources.len();
        self.sources.push(source);
        id
    }

    /// `1 + e_j`.
    fn factor(&self, j: usize) -> Polynomial {
        &Polynomial::one(self.total) + &Polynomial::var(self.total, self.n + j)
    }

    fn op(&mut self, op: OpKind, value: Polynomial) -> Polynomial {
        let ordinal = self.ordinal;
        self.ordinal += 1;
        let j = self.fresh(ErrorSource::Op { op, ordinal });
        &value * &self.factor(j)
    }

    fn build(&mut self, e: &Expr) -> Polynomial {
        match e {
            Expr::Var(i) => {
                let x = Polynomial::var(self.total, *i);
                if !self.opts.round_inputs {
                    return x;
                }
                let j = match self.var_error[*i] {
                    Some(j) => j,
                    None => {
                        let j = self.fresh(ErrorSource::Input { var: *i });
                        self.var_error[*i] = Some(j);
                        j
                    }
                };
                &x * &self.factor(j)
            }
            Expr::Const(c) => self.constant(c),
            Expr::Neg(a) => {
                let v = self.build(a);
                self.op(OpKind::Neg, -&v)
            }
            Expr::Add(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.op(OpKind::Add, &x + &y)
            }
            Expr::Sub(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.op(OpKind::Sub, &x - &y)
            }
            Expr::Mul(a, b) => {
                let (x, y) = (self.build(a), self.build(b));
                self.op(OpKind::Mul, &x * &y)
            }
            Expr::Div(a, c) => {
                let x = self.build(a);
                self.op(OpKind::Div, x.scale(&c.value.recip()))
            }
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return Polynomial::one(self.total);
                }
                let base = self.build(a);
                let mut acc = base.clone();
                for _ in 1..*n {
                    acc = self.op(OpKind::Mul, &acc * &base);
                }
                acc
            }
        }
    }

    fn constant(&mut self, c: &Constant) -> Polynomial {
        let v = Polynomial::constant(self.total, c.value.clone());
        if c.is_inexact() {
            let j = self.fresh(ErrorSource::Constant {
                literal: c.literal.clone(),
            });
            &v * &self.factor(j)
        } else {
            v
        }
    }
}

/// Builds `f^`, `f` and `r = f^ - f` for a program over `nvars` inputs.
pub fn round_expression(
    tree: &Expr,
    nvars: usize,
    precision: Precision,
    opts: RoundingOptions,
) -> RoundedProgram {
    assert!(
        tree.var_bound() <= nvars,
        "expression uses undeclared variables"
    );
    let m = count_error_vars(tree, nvars, opts);
    let mut b = Builder {
        n: nvars,
        total: nvars + m,
        opts,
        var_error: vec![None; nvars],
        sources: Vec::new(),
        ordinal: 0,
    };
    let approx = b.build(tree);
    debug_assert_eq!(b.sources.len(), m);
    let exact = tree.expand(nvars);
    let lifted = exact.embed(nvars + m, &(0..nvars).collect::<Vec<_>>());
    let residual = &approx - &lifted;
    RoundedProgram {
        n: nvars,
        m,
        precision,
        exact,
        approx,
        residual,
        sources: b.sources,
    }
}

/// The linear part `l = sum_j e_j s_j(x)` of the residual.
#[derive(Debug, Clone)]
pub struct LinearPart {
    /// `s_j` over the `n` input variables.
    pub s: Vec<Polynomial>,
    /// `l` over `n + m` variables.
    pub l: Polynomial,
}

/// Extracts the terms of degree exactly one in the error variables.
pub fn linear_part(r: &Polynomial, n: usize, m: usize) -> LinearPart {
    assert_eq!(r.nvars(), n + m);
    let mut s = vec![Polynomial::zero(n); m];
    let mut l = Polynomial::zero(n + m);
    for (mono, c) in r.terms() {
        let e_deg: u32 = mono[n..].iter().map(|&d| d as u32).sum();
        if e_deg != 1 {
            continue;
        }
        let j = mono[n..].iter().position(|&d| d == 1).unwrap();
        s[j].add_term(mono[..n].to_vec(), c.clone());
        l.add_term(mono.clone(), c.clone());
    }
    LinearPart { s, l }
}

/// Same split computed as `s_j = dr/de_j` at `e = 0`.
pub fn linear_part_by_derivatives(r: &Polynomial, n: usize, m: usize) -> LinearPart {
    let errors: Vec<usize> = (n..n + m).collect();
    let mut l = Polynomial::zero(n + m);
    let mut s = Vec::with_capacity(m);
    for j in 0..m {
        let d = r.differentiate(n + j).substitute_zero(&errors);
        let e = Polynomial::var(n + m, n + j);
        l = &l + &(&d * &e);
        s.push(project_inputs(&d, n));
    }
    LinearPart { s, l }
}

/// Drops error variables from a polynomial that does not use them.
fn project_inputs(p: &Polynomial, n: usize) -> Polynomial {
    Polynomial::from_terms(
        n,
        p.terms().map(|(m, c)| {
            debug_assert!(m[n..].iter().all(|&d| d == 0));
            (m[..n].to_vec(), c.clone())
        }),
    )
}

/// The box `X x [-eps, eps]^m`.
pub fn error_domain(domain: &BoxDomain, m: usize, precision: Precision) -> BoxDomain {
    domain.product(&BoxDomain::symmetric(m, &precision.epsilon()))
}

impl RoundedProgram {
    pub fn linear(&self) -> LinearPart {
        linear_part(&self.residual, self.n, self.m)
    }

    /// `h = r - l`.
    pub fn remainder(&self, l: &Polynomial) -> Polynomial {
        &self.residual - l
    }

    /// Interval upper bound on `|h|` over `X x E`.
    pub fn remainder_bound(&self, domain: &BoxDomain, l: &Polynomial) -> Rational {
        let h = self.remainder(l);
        interval_eval_symmetric_tail(&h, domain, &self.precision.epsilon()).magnitude()
    }
}

/// Exact relative errors of one concrete run, in error-variable order.
#[derive(Debug, Clone)]
pub struct ConcreteRun {
    pub deltas: Vec<Rational>,
    /// The floating-point result as an exact rational.
    pub float_result: Rational,
    pub exact_result: Rational,
}

/// Runs the program on real input `x`, recording each rounding's relative error.
pub fn concrete_run(
    tree: &Expr,
    nvars: usize,
    precision: Precision,
    opts: RoundingOptions,
    x: &[Rational],
) -> ConcreteRun {
    let mut t = Tracer {
        prec: precision,
        opts,
        x,
        var_seen: vec![false; nvars],
        deltas: Vec::new(),
    };
    let float_result = t.run(tree);
    ConcreteRun {
        deltas: t.deltas,
        float_result,
        exact_result: tree.eval_rational(x),
    }
}

struct Tracer<'a> {
    prec: Precision,
    opts: RoundingOptions,
    x: &'a [Rational],
    var_seen: Vec<bool>,
    deltas: Vec<Rational>,
}

impl Tracer<'_> {
    fn round(&mut self, exact: Rational) -> Rational {
        let fl = round_to(&exact, self.prec);
        self.deltas.push(relative(&fl, &exact));
        fl
    }

    fn run(&mut self, e: &Expr) -> Rational {
        match e {
            Expr::Var(i) => {
                let v = &self.x[*i];
                let fl = round_to(v, self.prec);
                if self.opts.round_inputs && !self.var_seen[*i] {
                    self.var_seen[*i] = true;
                    self.deltas.push(relative(&fl, v));
                }
                if self.opts.round_inputs {
                    fl
                } else {
                    v.clone()
                }
            }
            Expr::Const(c) => {
                if c.is_inexact() {
                    self.deltas.push(relative(&c.rounded, &c.value));
                }
                c.rounded.clone()
            }
            Expr::Neg(a) => {
                let v = self.run(a);
                self.round(-v)
            }
            Expr::Add(a, b) => {
                let (u, v) = (self.run(a), self.run(b));
                self.round(u + v)
            }
            Expr::Sub(a, b) => {
                let (u, v) = (self.run(a), self.run(b));
                self.round(u - v)
            }
            Expr::Mul(a, b) => {
                let (u, v) = (self.run(a), self.run(b));
                self.round(u * v)
            }
            Expr::Div(a, c) => {
                let u = self.run(a);
                self.round(u / &c.value)
            }
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return Rational::one();
                }
                let base = self.run(a);
                let mut acc = base.clone();
                for _ in 1..*n {
                    acc = self.round(&acc * &base);
                }
                acc
            }
        }
    }
}

fn relative(fl: &Rational, exact: &Rational) -> Rational {
    if exact.is_zero() {
        Rational::zero()
    } else {
        (fl - exact) / exact
    }
}
