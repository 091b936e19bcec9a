//! Expression trees for straight-line polynomial programs and the input language.
//!
//! A program file has the shape
//!
//! ```text
//! vars x1 in [-15, 15]; x2 in [-15, 15];
//! expr -x1*x2 - 2*x2 - x1;
//! prec double;
//! ```
//!
//! Decimal literals are rounded to the program precision when parsed; a
//! literal `a/b` of two integers keeps its exact value and, when it is not
//! representable, is rounded at run time. Division is only by constants.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::float::{
    format_rational, is_representable, parse_decimal, round_to, to_f64_nearest, Precision, Rational,
};
use crate::interval::BoxDomain;
use crate::poly::Polynomial;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("division by a non-constant expression")]
    NonConstantDivisor,
    #[error("divisor `{0}` is not representable in the program precision")]
    InexactDivisor(String),
    #[error("variables must be declared as x1..xn in order, found `{0}`")]
    VariableOrder(String),
    #[error("empty interval for `{0}`")]
    EmptyInterval(String),
}

/// A literal constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constant {
    /// Real value used by the exact semantics.
    pub value: Rational,
    /// Value after rounding to the program precision.
    pub rounded: Rational,
    /// Source text.
    pub literal: String,
}

impl Constant {
    pub fn new(value: Rational, literal: impl Into<String>, prec: Precision) -> Self {
        let rounded = round_to(&value, prec);
        Constant {
            value,
            rounded,
            literal: literal.into(),
        }
    }

    /// A constant whose real value is already the rounded decimal.
    pub fn decimal(text: &str, prec: Precision) -> Option<Self> {
        let exact = parse_decimal(text)?;
        let rounded = round_to(&exact, prec);
        Some(Constant {
            value: rounded.clone(),
            rounded,
            literal: text.to_string(),
        })
    }

    pub fn integer(n: i64) -> Self {
        let v = Rational::from_integer(BigInt::from(n));
        Constant {
            value: v.clone(),
            rounded: v,
            literal: n.to_string(),
        }
    }

    /// True when the float program computes something other than `value`.
    pub fn is_inexact(&self) -> bool {
        self.value != self.rounded
    }

    pub fn rounded_f64(&self) -> f64 {
        to_f64_nearest(&self.rounded)
    }

    fn is_integer_literal(&self) -> bool {
        let body = self.literal.strip_prefix('-').unwrap_or(&self.literal);
        !body.is_empty() && body.chars().all(|c| c.is_ascii_digit())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    /// Zero-based variable index.
    Var(usize),
    Const(Constant),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Constant),
    /// The base is evaluated once, then multiplied `n - 1` times left to right.
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    pub neg: usize,
    pub add: usize,
    pub sub: usize,
    pub mul: usize,
    pub div: usize,
}

impl OpCounts {
    pub fn total(&self) -> usize {
        self.neg + self.add + self.sub + self.mul + self.div
    }
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn constant(n: i64) -> Self {
        Expr::Const(Constant::integer(n))
    }

    pub fn op_counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        self.count_into(&mut c);
        c
    }

    fn count_into(&self, c: &mut OpCounts) {
        match self {
            Expr::Var(_) | Expr::Const(_) => {}
            Expr::Neg(a) => {
                c.neg += 1;
                a.count_into(c);
            }
            Expr::Add(a, b) => {
                c.add += 1;
                a.count_into(c);
                b.count_into(c);
            }
            Expr::Sub(a, b) => {
                c.sub += 1;
                a.count_into(c);
                b.count_into(c);
            }
            Expr::Mul(a, b) => {
                c.mul += 1;
                a.count_into(c);
                b.count_into(c);
            }
            Expr::Div(a, _) => {
                c.div += 1;
                a.count_into(c);
            }
            Expr::Pow(a, n) => {
                c.mul += n.saturating_sub(1) as usize;
                if *n > 0 {
                    a.count_into(c);
                }
            }
        }
    }

    /// Largest variable index plus one.
    pub fn var_bound(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Neg(a) | Expr::Div(a, _) | Expr::Pow(a, _) => a.var_bound(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.var_bound().max(b.var_bound()),
        }
    }

    /// Real-number semantics as a polynomial in `nvars` variables.
    pub fn expand(&self, nvars: usize) -> Polynomial {
        match self {
            Expr::Var(i) => Polynomial::var(nvars, *i),
            Expr::Const(c) => Polynomial::constant(nvars, c.value.clone()),
            Expr::Neg(a) => -&a.expand(nvars),
            Expr::Add(a, b) => &a.expand(nvars) + &b.expand(nvars),
            Expr::Sub(a, b) => &a.expand(nvars) - &b.expand(nvars),
            Expr::Mul(a, b) => &a.expand(nvars) * &b.expand(nvars),
            Expr::Div(a, c) => a.expand(nvars).scale(&c.value.recip()),
            Expr::Pow(a, n) => a.expand(nvars).pow(*n),
        }
    }

    /// Exact real value at a rational point.
    pub fn eval_rational(&self, point: &[Rational]) -> Rational {
        match self {
            Expr::Var(i) => point[*i].clone(),
            Expr::Const(c) => c.value.clone(),
            Expr::Neg(a) => -a.eval_rational(point),
            Expr::Add(a, b) => a.eval_rational(point) + b.eval_rational(point),
            Expr::Sub(a, b) => a.eval_rational(point) - b.eval_rational(point),
            Expr::Mul(a, b) => a.eval_rational(point) * b.eval_rational(point),
            Expr::Div(a, c) => a.eval_rational(point) / &c.value,
            Expr::Pow(a, n) => num_traits::pow(a.eval_rational(point), *n as usize),
        }
    }

    /// Floating-point semantics: every operation rounds to nearest in `prec`.
    pub fn eval_float(&self, point: &[f64], prec: Precision) -> f64 {
        match self {
            Expr::Var(i) => prec.round_f64(point[*i]),
            Expr::Const(c) => c.rounded_f64(),
            Expr::Neg(a) => -a.eval_float(point, prec),
            Expr::Add(a, b) => {
                prec.round_f64(a.eval_float(point, prec) + b.eval_float(point, prec))
            }
            Expr::Sub(a, b) => {
                prec.round_f64(a.eval_float(point, prec) - b.eval_float(point, prec))
            }
            Expr::Mul(a, b) => {
                prec.round_f64(a.eval_float(point, prec) * b.eval_float(point, prec))
            }
            Expr::Div(a, c) => prec.round_f64(a.eval_float(point, prec) / c.rounded_f64()),
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return 1.0;
                }
                let base = a.eval_float(point, prec);
                let mut acc = base;
                for _ in 1..*n {
                    acc = prec.round_f64(acc * base);
                }
                acc
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Const(c) if c.literal.contains('/') || c.literal.starts_with('-') => {
                write!(f, "({})", c.literal)
            }
            Expr::Const(c) => f.write_str(&c.literal),
            Expr::Neg(a) => match a.as_ref() {
                Expr::Const(_) => write!(f, "(-({a}))"),
                _ => write!(f, "(-{a})"),
            },
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, c) => write!(f, "({a} / ({}))", c.literal),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
        }
    }
}

/// A parsed program: input box, expression and precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub domain: BoxDomain,
    pub expr: Expr,
    pub precision: Precision,
}

impl Program {
    pub fn nvars(&self) -> usize {
        self.domain.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_digit()
            || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push((start, Tok::Num(text[start..i].to_string())));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()[],;".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError::Syntax {
                pos: i,
                msg: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    nvars: usize,
    prec: Precision,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{kw}`")),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat_sym('-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym('*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat_sym('/') {
                let rhs = self.unary()?;
                let divisor = match rhs {
                    Expr::Const(c) => c,
                    _ => return Err(ParseError::NonConstantDivisor),
                };
                if divisor.value.is_zero() {
                    return Err(ParseError::DivisionByZero);
                }
                lhs = match lhs {
                    Expr::Const(num)
                        if num.is_integer_literal() && divisor.is_integer_literal() =>
                    {
                        let value = &num.value / &divisor.value;
                        let literal = format!("{}/{}", num.literal, divisor.literal);
                        Expr::Const(Constant::new(value, literal, self.prec))
                    }
                    other => {
                        if !is_representable(&divisor.value, self.prec) {
                            return Err(ParseError::InexactDivisor(divisor.literal));
                        }
                        Expr::Div(Box::new(other), divisor)
                    }
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym('-') {
            if let Some(Tok::Num(text)) = self.peek().cloned() {
                self.pos += 1;
                let c = self.number(&format!("-{text}"))?;
                return self.power(Expr::Const(c));
            }
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.atom()?;
        self.power(base)
    }

    fn power(&mut self, base: Expr) -> Result<Expr, ParseError> {
        if !self.eat_sym('^') {
            return Ok(base);
        }
        let n = match self.peek().cloned() {
            Some(Tok::Num(t)) if t.chars().all(|c| c.is_ascii_digit()) => {
                self.pos += 1;
                t.parse::<u32>()
                    .or_else(|_| self.err("exponent too large"))?
            }
            _ => return self.err("expected a nonnegative integer exponent"),
        };
        if self.peek() == Some(&Tok::Sym('^')) {
            return self.err("chained exponents need parentheses");
        }
        Ok(match n {
            0 => Expr::constant(1),
            1 => base,
            _ => Expr::Pow(Box::new(base), n),
        })
    }

    fn number(&self, text: &str) -> Result<Constant, ParseError> {
        match Constant::decimal(text, self.prec) {
            Some(c) => Ok(c),
            None => self.err(format!("malformed number `{text}`")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(text)) => {
                self.pos += 1;
                Ok(Expr::Const(self.number(&text)?))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let idx = variable_index(&name)
                    .ok_or_else(|| ParseError::UnknownVariable(name.clone()))?;
                if idx >= self.nvars {
                    return Err(ParseError::UnknownVariable(name));
                }
                Ok(Expr::Var(idx))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            _ => self.err("expected a number, variable or `(`"),
        }
    }

    /// A signed bound: decimal or `a/b`.
    fn bound(&mut self) -> Result<Rational, ParseError> {
        let negative = self.eat_sym('-');
        let mut value = match self.peek().cloned() {
            Some(Tok::Num(t)) => {
                self.pos += 1;
                match parse_decimal(&t) {
                    Some(v) => v,
                    None => return self.err(format!("malformed number `{t}`")),
                }
            }
            _ => return self.err("expected a number"),
        };
        if self.eat_sym('/') {
            let den = match self.peek().cloned() {
                Some(Tok::Num(t)) => {
                    self.pos += 1;
                    match parse_decimal(&t) {
                        Some(v) => v,
                        None => return self.err(format!("malformed number `{t}`")),
                    }
                }
                _ => return self.err("expected a denominator"),
            };
            if den.is_zero() {
                return Err(ParseError::DivisionByZero);
            }
            value /= den;
        }
        Ok(if negative { -value } else { value })
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }
}

/// `x7` maps to index 6.
fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    let n: usize = digits.parse().ok()?;
    if n == 0 || digits.starts_with('0') {
        return None;
    }
    Some(n - 1)
}

/// Parses an expression over `x1..x{nvars}` in double precision.
pub fn parse_expr(text: &str, nvars: usize) -> Result<Expr, ParseError> {
    parse_expr_with(text, nvars, Precision::Double)
}

pub fn parse_expr_with(text: &str, nvars: usize, prec: Precision) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        nvars,
        prec,
    };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a whole program file.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        nvars: 0,
        prec: Precision::Double,
    };
    p.expect_keyword("vars")?;
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    loop {
        let name = match p.peek().cloned() {
            Some(Tok::Ident(n)) if n != "expr" => n,
            _ => break,
        };
        p.pos += 1;
        if variable_index(&name) != Some(lo.len()) {
            return Err(ParseError::VariableOrder(name));
        }
        p.expect_keyword("in")?;
        p.expect_sym('[')?;
        let a = p.bound()?;
        p.expect_sym(',')?;
        let b = p.bound()?;
        p.expect_sym(']')?;
        p.expect_sym(';')?;
        if a > b {
            return Err(ParseError::EmptyInterval(name));
        }
        lo.push(a);
        hi.push(b);
    }
    if lo.is_empty() {
        return p.err("at least one variable is required");
    }
    p.expect_keyword("expr")?;
    let expr_start = p.pos;
    let mut depth = 0i32;
    let mut expr_end = expr_start;
    while let Some(t) = p.toks.get(expr_end) {
        match t.1 {
            Tok::Sym('(') => depth += 1,
            Tok::Sym(')') => depth -= 1,
            Tok::Sym(';') if depth == 0 => break,
            _ => {}
        }
        expr_end += 1;
    }
    // Precision is declared after the expression but governs its literals.
    let mut prec = Precision::Double;
    let mut tail = Parser {
        toks: p.toks[expr_end..].to_vec(),
        pos: 0,
        end: text.len(),
        nvars: 0,
        prec,
    };
    tail.expect_sym(';')?;
    if tail.peek().is_some() {
        tail.expect_keyword("prec")?;
        prec = match tail.peek().cloned() {
            Some(Tok::Ident(s)) => match s.parse::<Precision>() {
                Ok(v) => {
                    tail.pos += 1;
                    v
                }
                Err(m) => return tail.err(m),
            },
            _ => return tail.err("expected `double` or `single`"),
        };
        tail.eat_sym(';');
        tail.finish()?;
    }
    let mut ep = Parser {
        toks: p.toks[expr_start..expr_end].to_vec(),
        pos: 0,
        end: p.toks.get(expr_end).map(|t| t.0).unwrap_or(text.len()),
        nvars: lo.len(),
        prec,
    };
    let expr = ep.expr()?;
    ep.finish()?;
    Ok(Program {
        domain: BoxDomain::new(lo, hi),
        expr,
        precision: prec,
    })
}

/// Renders a program in the input language.
pub fn format_program(prog: &Program) -> String {
    let mut out = String::from("vars");
    for i in 0..prog.domain.dim() {
        out.push_str(&format!(
            " x{} in [{}, {}];",
            i + 1,
            format_rational(&prog.domain.lo[i]),
            format_rational(&prog.domain.hi[i])
        ));
    }
    out.push_str(&format!(
        "\nexpr {};\nprec {};\n",
        prog.expr, prog.precision
    ));
    out
}
