//! The nine benchmark programs with their published reference values.

use crate::expr::{parse_expr_with, Expr};
use crate::float::{parse_decimal, Precision};
use crate::interval::BoxDomain;
use crate::pipeline::Method;
use crate::rounding::{count_error_vars, RoundingOptions};

#[derive(Debug, Clone, Copy)]
pub struct ReferenceCell {
    pub method: Method,
    pub k: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FlopRow {
    pub k: u32,
    pub geneig: f64,
    pub mvbeta: f64,
    pub robsdp: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Benchmark {
    pub id: &'static str,
    pub name: &'static str,
    pub n: usize,
    /// Expression text; the bracketing fixes the operation tree.
    pub expr: &'static str,
    pub lo: &'static str,
    pub hi: &'static str,
    /// Why this bracketing was chosen, when the source leaves it open.
    pub bracketing: &'static str,
    pub expected_m: usize,
    /// Reference lower bounds by method and order.
    pub bounds: &'static [ReferenceCell],
    /// Random-sampling lower bound reported alongside.
    pub sampled_lower: f64,
    /// Local-optimization estimate of `max eps sum |s_j|`.
    pub nlopt: f64,
    /// Certified upper bound on the roundoff error; every lower bound must stay below it.
    pub upper: f64,
    /// Published flop estimates by order.
    pub flops: &'static [FlopRow],
}

impl Benchmark {
    pub fn tree(&self) -> Expr {
        self.tree_with(Precision::Double)
    }

    /// Literals are rounded to `prec` at parse time.
    pub fn tree_with(&self, prec: Precision) -> Expr {
        parse_expr_with(self.expr, self.n, prec).expect("registry expression parses")
    }

    pub fn domain(&self) -> BoxDomain {
        let lo = parse_decimal(self.lo).expect("registry bound parses");
        let hi = parse_decimal(self.hi).expect("registry bound parses");
        BoxDomain::new(vec![lo; self.n], vec![hi; self.n])
    }

    /// Number of error variables of the registry tree under input rounding.
    pub fn m(&self) -> usize {
        count_error_vars(&self.tree(), self.n, RoundingOptions::default())
    }

    pub fn m_matches(&self) -> bool {
        self.m() == self.expected_m
    }

    pub fn reference(&self, method: Method, k: u32) -> Option<f64> {
        self.bounds
            .iter()
            .find(|c| c.method == method && c.k == k)
            .map(|c| c.value)
    }
}

const fn c(method: Method, k: u32, value: f64) -> ReferenceCell {
    ReferenceCell { method, k, value }
}

const fn fr(k: u32, geneig: f64, mvbeta: f64, robsdp: f64) -> FlopRow {
    FlopRow {
        k,
        geneig,
        mvbeta,
        robsdp,
    }
}

use Method::{Geneig as G, Mvbeta as B, Robsdp as R};

pub static BENCHMARKS: [Benchmark; 9] = [
    Benchmark {
        id: "a",
        name: "rigidBody1",
        n: 3,
        expr: "-x1*x2 - 2*x2*x3 - x1 - x3",
        lo: "-15",
        hi: "15",
        bracketing: "left-to-right",
        expected_m: 10,
        bounds: &[
            c(G, 1, 1.05e-15), c(G, 2, 2.84e-14), c(G, 3, 5.83e-14), c(G, 4, 8.72e-14),
            c(B, 1, 1.85e-16), c(B, 2, 4.07e-15), c(B, 3, 8.88e-15), c(B, 4, 1.73e-14),
            c(R, 1, 3.30e-14), c(R, 2, 7.52e-14), c(R, 3, 1.10e-13), c(R, 4, 1.62e-13), c(R, 8, 3.55e-13),
        ],
        sampled_lower: 2.28e-13,
        nlopt: 4.80e-13,
        upper: 5.33e-13,
        flops: &[fr(1, 2.75e3, 3.50e3, 6.40e4), fr(8, 8.43e15, 1.04e12, 4.50e9)],
    },
    Benchmark {
        id: "b",
        name: "rigidBody2",
        n: 3,
        expr: "2*x1*x2*x3 + 6*x3^2 + (-x2^2)*x1*x3 - x2",
        lo: "-15",
        hi: "15",
        bracketing: "the negation applies to the square, giving 12 operations",
        expected_m: 15,
        bounds: &[
            c(G, 1, 8.40e-14), c(G, 2, 1.31e-12), c(G, 3, 2.89e-12),
            c(B, 1, 4.99e-14), c(B, 2, 2.41e-13), c(B, 3, 5.08e-13),
            c(R, 1, 3.56e-12), c(R, 2, 5.31e-12), c(R, 3, 8.04e-12), c(R, 4, 1.13e-11), c(R, 7, 2.60e-11),
        ],
        sampled_lower: 2.19e-11,
        nlopt: 6.40e-11,
        upper: 6.48e-11,
        flops: &[fr(1, 6.86e3, 9.99e3, 2.16e5), fr(7, 1.12e17, 1.02e13, 5.84e9)],
    },
    Benchmark {
        id: "c",
        name: "kepler0",
        n: 6,
        expr: "x2*x5 + x3*x6 - x2*x3 - x5*x6 + x1*(-x1 + x2 + x3 - x4 + x5 + x6)",
        lo: "4",
        hi: "6.36",
        bracketing: "left-to-right",
        expected_m: 21,
        bounds: &[
            c(G, 1, 9.45e-15), c(G, 2, 1.64e-14),
            c(B, 1, 3.95e-15), c(B, 2, 7.89e-15),
            c(R, 1, 9.68e-15), c(R, 2, 1.48e-14), c(R, 3, 2.62e-14),
        ],
        sampled_lower: 2.23e-14,
        nlopt: 1.02e-13,
        upper: 1.18e-13,
        flops: &[fr(1, 2.20e4, 3.12e4, 3.18e6), fr(4, 3.12e13, 6.19e10, 8.58e10)],
    },
    Benchmark {
        id: "d",
        name: "kepler1",
        n: 4,
        expr: "x1*x4*(-x1 + x2 + x3 - x4) + x2*(x1 - x2 + x3 + x4) + x3*(x1 + x2 - x3 + x4) - x2*x3*x4 - x1*x3 - x1*x2 - x4",
        lo: "4",
        hi: "6.36",
        bracketing: "left-to-right",
        expected_m: 28,
        bounds: &[
            c(G, 1, 3.01e-14), c(G, 2, 5.38e-14),
            c(B, 1, 1.41e-14), c(B, 2, 2.45e-14),
            c(R, 1, 1.49e-13), c(R, 2, 2.22e-13), c(R, 3, 3.04e-13), c(R, 4, 4.06e-13),
        ],
        sampled_lower: 7.58e-14,
        nlopt: 3.93e-13,
        upper: 4.47e-13,
        flops: &[fr(1, 3.60e4, 5.83e4, 2.75e6), fr(4, 2.05e14, 2.98e11, 7.53e9)],
    },
    Benchmark {
        id: "e",
        name: "kepler2",
        n: 6,
        expr: "x1*x4*(-x1 + x2 + x3 - x4 + x5 + x6) + x2*x5*(x1 - x2 + x3 + x4 - x5 + x6) + x3*x6*(x1 + x2 - x3 + x4 + x5 - x6) - x2*x3*x4 - x1*x3*x5 - x1*x2*x6 - x4*x5*x6",
        lo: "4",
        hi: "6.36",
        bracketing: "left-to-right",
        expected_m: 42,
        bounds: &[c(G, 1, 9.72e-28), c(B, 1, 5.55e-14), c(R, 1, 2.88e-13), c(R, 2, 4.48e-13)],
        sampled_lower: 3.03e-13,
        nlopt: 2.01e-12,
        upper: 2.09e-12,
        flops: &[fr(1, 1.18e5, 1.96e5, 2.55e7), fr(4, 1.99e16, 9.99e12, 6.87e11)],
    },
    Benchmark {
        id: "f",
        name: "sineTaylor",
        n: 1,
        expr: "x1*(1.0 - x1^2*(1.0/6.0 - x1^2*(1.0/120.0 - x1^2/5040.0)))",
        lo: "-1.57079632679",
        hi: "1.57079632679",
        bracketing: "Horner form in x^2 with the coefficients written as quotients",
        expected_m: 13,
        bounds: &[
            c(G, 1, 8.34e-17), c(G, 2, 1.52e-16), c(G, 3, 2.07e-16),
            c(B, 1, 1.50e-17), c(B, 2, 4.50e-17), c(B, 3, 7.95e-17),
            c(R, 1, 1.98e-16), c(R, 2, 2.31e-16), c(R, 3, 2.72e-16), c(R, 4, 3.04e-16), c(R, 8, 4.43e-16),
        ],
        sampled_lower: 4.45e-16,
        nlopt: 5.50e-16,
        upper: 6.03e-16,
        flops: &[fr(1, 3.38e3, 5.28e3, 1.76e4), fr(8, 3.27e16, 3.45e12, 1.61e6)],
    },
    Benchmark {
        id: "g",
        name: "sineOrder3",
        n: 1,
        expr: "0.954929658551372*x1 - 0.12900613773279798*x1^3",
        lo: "-2",
        hi: "2",
        bracketing: "left-to-right, cube as two multiplications",
        expected_m: 6,
        bounds: &[
            c(G, 1, 1.09e-16), c(G, 2, 2.43e-16), c(G, 3, 3.68e-16), c(G, 4, 4.72e-16), c(G, 6, 6.28e-16),
            c(B, 1, 4.93e-17), c(B, 2, 1.18e-16), c(B, 3, 1.78e-16), c(B, 4, 2.33e-16), c(B, 6, 2.87e-16),
            c(R, 1, 3.99e-16), c(R, 2, 4.83e-16), c(R, 3, 5.62e-16), c(R, 4, 6.37e-16), c(R, 6, 7.85e-16), c(R, 8, 9.30e-16),
        ],
        sampled_lower: 3.34e-16,
        nlopt: 1.00e-15,
        upper: 1.19e-15,
        flops: &[fr(1, 5.12e2, 6.30e2, 1.73e3), fr(8, 2.67e11, 4.08e8, 1.58e5)],
    },
    Benchmark {
        id: "h",
        name: "sqroot",
        n: 1,
        expr: "1.0 + 0.5*x1 - 0.125*x1^2 + 0.0625*x1^3 - 0.0390625*x1^4",
        lo: "0",
        hi: "1",
        bracketing: "left-to-right, powers as repeated multiplication",
        expected_m: 15,
        bounds: &[
            c(G, 1, 2.30e-16), c(G, 2, 4.00e-16), c(G, 3, 5.36e-16),
            c(B, 1, 1.29e-16), c(B, 2, 2.55e-16), c(B, 3, 3.28e-16),
            c(R, 1, 4.83e-16), c(R, 2, 5.40e-16), c(R, 3, 5.78e-16), c(R, 4, 6.13e-16), c(R, 7, 7.00e-16),
        ],
        sampled_lower: 4.45e-16,
        nlopt: 7.10e-16,
        upper: 1.29e-15,
        flops: &[fr(1, 4.92e3, 7.92e3, 2.70e4), fr(7, 1.48e16, 2.51e12, 1.73e6)],
    },
    Benchmark {
        id: "i",
        name: "himmilbeau",
        n: 2,
        expr: "(x1^2 + x2 - 11)^2 + (x1 + x2^2 - 7)^2",
        lo: "-5",
        hi: "5",
        bracketing: "squares of the two inner sums, each inner sum evaluated once",
        expected_m: 11,
        bounds: &[
            c(G, 1, 3.07e-14), c(G, 2, 6.71e-14), c(G, 3, 1.25e-13), c(G, 4, 1.92e-13),
            c(B, 1, 1.60e-14), c(B, 2, 2.68e-14), c(B, 3, 3.72e-14), c(B, 4, 5.35e-14),
            c(R, 1, 1.56e-13), c(R, 2, 2.13e-13), c(R, 3, 2.84e-13), c(R, 4, 3.63e-13), c(R, 8, 7.67e-13),
        ],
        sampled_lower: 1.47e-13,
        nlopt: 1.42e-12,
        upper: 1.43e-12,
        flops: &[fr(1, 2.75e3, 3.87e3, 3.60e4), fr(8, 8.43e15, 1.14e12, 1.22e8)],
    },
];

pub fn lookup(id: &str) -> Option<&'static Benchmark> {
    BENCHMARKS
        .iter()
        .find(|b| b.id == id || b.name.eq_ignore_ascii_case(id))
}
