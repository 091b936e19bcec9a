//! End-to-end driver: split the residual into linear part and remainder, bound
//! the remainder by intervals, bound `max |l|` from below, and combine.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::abssum::abs_sum_lower_bound;
use crate::bench::sampling::sample_lower_bound;
use crate::expr::Expr;
use crate::float::{rational_from_f64, to_f64, Precision, Rational, RoundMode};
use crate::geneig::{geneig_bound, GeneigError};
use crate::interval::{ia_bound, BoxDomain};
use crate::mvbeta::{mvbeta_bound, MvbetaError, DEFAULT_BUDGET};
use crate::robsdp::{build_robust_lmi, robsdp_bound, RobsdpError};
use crate::rounding::{
    error_domain, round_expression, LinearPart, RoundedProgram, RoundingOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Geneig,
    Mvbeta,
    Robsdp,
    Sample,
    #[serde(rename = "abssum")]
    AbsSum,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Geneig,
        Method::Mvbeta,
        Method::Robsdp,
        Method::Sample,
        Method::AbsSum,
    ];

    /// Methods indexed by a relaxation order.
    pub fn is_hierarchy(self) -> bool {
        matches!(self, Method::Geneig | Method::Mvbeta | Method::Robsdp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Geneig => "geneig",
            Method::Mvbeta => "mvbeta",
            Method::Robsdp => "robsdp",
            Method::Sample => "sample",
            Method::AbsSum => "abssum",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpsdpError {
    #[error("geneig: {0}")]
    Geneig(#[from] GeneigError),
    #[error("mvbeta: {0}")]
    Mvbeta(#[from] MvbetaError),
    #[error("robsdp: {0}")]
    Robsdp(#[from] RobsdpError),
    #[error("program uses {used} variables but the box has {declared}")]
    Dimension { used: usize, declared: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsdpOptions {
    pub rounding: RoundingOptions,
    pub mvbeta_budget: u128,
    pub samples: usize,
    pub seed: u64,
    /// Objective evaluations allowed to the absolute-sum search.
    pub search_budget: usize,
}

impl Default for FpsdpOptions {
    fn default() -> Self {
        FpsdpOptions {
            rounding: RoundingOptions::default(),
            mvbeta_budget: DEFAULT_BUDGET,
            samples: 1_000_000,
            seed: 0,
            search_budget: 200_000,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub decompose: f64,
    pub upper_side: f64,
    pub lower_side: f64,
    pub total: f64,
}

/// One `(method, k)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub method: Method,
    /// Relaxation order; zero for sampling and search.
    pub k: u32,
    pub precision: Precision,
    pub n: usize,
    pub m: usize,
    /// Lower bound on `max l`.
    pub l_upper: f64,
    /// Upper bound on `min l`.
    pub l_lower: f64,
    /// `max(-l_lower, l_upper)`.
    pub l_k: f64,
    /// Upper bound on `max |h|`.
    pub h_bar: f64,
    /// `max(l_k - h_bar, 0)`.
    pub final_bound: f64,
    /// Certificate residuals for the two sides, when the method produces them.
    pub residuals: Vec<f64>,
    pub certified: bool,
    /// Free-form detail such as the mvbeta maximizer or the sample count.
    pub note: String,
    pub timings: Timings,
}

/// The decomposition of a program, shared across methods and orders.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub tree: Expr,
    pub domain: BoxDomain,
    pub program: RoundedProgram,
    pub linear: LinearPart,
    pub h_bar: Rational,
    /// Upper bound on `max l` from `eps sum_j |s_j|` by intervals.
    pub lambda_hi: Rational,
    pub decompose_seconds: f64,
}

impl Analysis {
    pub fn new(
        tree: &Expr,
        domain: &BoxDomain,
        precision: Precision,
        opts: RoundingOptions,
    ) -> Result<Self, FpsdpError> {
        let used = tree.var_bound();
        if used > domain.dim() {
            return Err(FpsdpError::Dimension {
                used,
                declared: domain.dim(),
            });
        }
        let start = Instant::now();
        let program = round_expression(tree, domain.dim(), precision, opts);
        let linear = program.linear();
        let h_bar = program.remainder_bound(domain, &linear.l);
        let eps = precision.epsilon();
        let lambda_hi = linear
            .s
            .iter()
            .fold(Rational::zero(), |acc, s| acc + ia_bound(s, domain))
            * eps;
        Ok(Analysis {
            tree: tree.clone(),
            domain: domain.clone(),
            program,
            linear,
            h_bar,
            lambda_hi,
            decompose_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn n(&self) -> usize {
        self.program.n
    }

    pub fn m(&self) -> usize {
        self.program.m
    }

    pub fn precision(&self) -> Precision {
        self.program.precision
    }

    pub fn h_bar_f64(&self) -> f64 {
        to_f64(&self.h_bar, RoundMode::Up)
    }

    pub fn lambda_hi_f64(&self) -> f64 {
        to_f64(&self.lambda_hi, RoundMode::Up)
    }

    /// Runs one method at order `k` (ignored by sampling and search).
    pub fn bound(
        &self,
        method: Method,
        k: u32,
        opts: &FpsdpOptions,
    ) -> Result<BoundReport, FpsdpError> {
        let start = Instant::now();
        let mut residuals = Vec::new();
        let mut certified = true;
        let mut note = String::new();
        let upper_t;
        let lower_t;
        let (l_upper, l_lower, combine_h) = match method {
            Method::Geneig | Method::Mvbeta => {
                let domain = error_domain(&self.domain, self.m(), self.precision());
                let l = &self.linear.l;
                let neg = -l;
                let t0 = Instant::now();
                let up = self.one_side(
                    method,
                    l,
                    &domain,
                    k,
                    opts,
                    &mut residuals,
                    &mut certified,
                    &mut note,
                )?;
                upper_t = t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let down = self.one_side(
                    method,
                    &neg,
                    &domain,
                    k,
                    opts,
                    &mut residuals,
                    &mut certified,
                    &mut note,
                )?;
                lower_t = t1.elapsed().as_secs_f64();
                (up, -down, true)
            }
            Method::Robsdp => {
                let eps = self.precision().epsilon();
                let lambda_hi = self.lambda_hi_f64();
                let t0 = Instant::now();
                let lmi = build_robust_lmi(&self.linear.s, &self.domain, &eps, k);
                let up = robsdp_bound(&lmi, lambda_hi)?;
                upper_t = t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let down = robsdp_bound(&lmi.negated(), lambda_hi)?;
                lower_t = t1.elapsed().as_secs_f64();
                residuals.extend([up.residual, down.residual]);
                certified &= up.certified && down.certified;
                note = format!("tau={:.6e}/{:.6e} dim={}", up.tau, down.tau, up.block_dim);
                (up.bound, -down.bound, true)
            }
            Method::Sample => {
                let t0 = Instant::now();
                let s = sample_lower_bound(
                    &self.tree,
                    &self.domain,
                    self.precision(),
                    opts.samples,
                    opts.seed,
                );
                upper_t = t0.elapsed().as_secs_f64();
                lower_t = 0.0;
                note = format!("samples={}", opts.samples);
                (s.value, -s.value, false)
            }
            Method::AbsSum => {
                let t0 = Instant::now();
                let eps = self.precision().epsilon();
                let a = abs_sum_lower_bound(
                    &self.linear.s,
                    &self.domain,
                    &eps,
                    opts.search_budget,
                    opts.seed,
                );
                upper_t = t0.elapsed().as_secs_f64();
                lower_t = 0.0;
                note = format!("evaluations={}", a.evaluations);
                (a.value, -a.value, true)
            }
        };
        let l_k = l_upper.max(-l_lower);
        let h_bar = if combine_h { self.h_bar_f64() } else { 0.0 };
        let final_bound = if combine_h {
            subtract_down(l_k, &self.h_bar)
        } else {
            l_k.max(0.0)
        };
        Ok(BoundReport {
            method,
            k: if method.is_hierarchy() { k } else { 0 },
            precision: self.precision(),
            n: self.n(),
            m: self.m(),
            l_upper,
            l_lower,
            l_k,
            h_bar,
            final_bound,
            residuals,
            certified,
            note,
            timings: Timings {
                decompose: self.decompose_seconds,
                upper_side: upper_t,
                lower_side: lower_t,
                total: start.elapsed().as_secs_f64() + self.decompose_seconds,
            },
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn one_side(
        &self,
        method: Method,
        p: &crate::poly::Polynomial,
        domain: &BoxDomain,
        k: u32,
        opts: &FpsdpOptions,
        residuals: &mut Vec<f64>,
        certified: &mut bool,
        note: &mut String,
    ) -> Result<f64, FpsdpError> {
        match method {
            Method::Geneig => {
                let r = geneig_bound(p, domain, k)?;
                residuals.push(r.residual);
                *certified &= r.certified;
                Ok(r.bound)
            }
            Method::Mvbeta => {
                let r = mvbeta_bound(p, domain, k, opts.mvbeta_budget)?;
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str(&format!("argmax eta={:?} beta={:?}", r.eta, r.beta));
                Ok(r.bound)
            }
            _ => unreachable!("not a moment hierarchy"),
        }
    }
}

/// `max(a - b, 0)` rounded toward negative infinity.
fn subtract_down(a: f64, b: &Rational) -> f64 {
    let diff = rational_from_f64(a) - b;
    if diff.is_positive() {
        to_f64(&diff, RoundMode::Down)
    } else {
        0.0
    }
}

/// One-shot driver for a single method and order.
pub fn fpsdp(
    tree: &Expr,
    domain: &BoxDomain,
    precision: Precision,
    method: Method,
    k: u32,
) -> Result<BoundReport, FpsdpError> {
    let opts = FpsdpOptions::default();
    Analysis::new(tree, domain, precision, opts.rounding)?.bound(method, k, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn exact_program_has_zero_bound() {
        let e = parse_expr("x1", 1).unwrap();
        let domain = BoxDomain::new(vec![q(1, 1)], vec![q(2, 1)]);
        let opts = FpsdpOptions {
            rounding: RoundingOptions {
                round_inputs: false,
            },
            ..Default::default()
        };
        let a = Analysis::new(&e, &domain, Precision::Double, opts.rounding).unwrap();
        assert_eq!(a.m(), 0);
        for method in [Method::Geneig, Method::Mvbeta, Method::Robsdp] {
            let r = a.bound(method, 1, &opts).unwrap();
            assert_eq!(r.final_bound, 0.0, "{method}");
        }
    }

    #[test]
    fn two_sides_agree_on_symmetric_error_box() {
        let e = parse_expr("x1*x1 - x1", 1).unwrap();
        let domain = BoxDomain::new(vec![q(0, 1)], vec![q(3, 1)]);
        let a = Analysis::new(&e, &domain, Precision::Double, RoundingOptions::default()).unwrap();
        for method in [Method::Geneig, Method::Mvbeta, Method::Robsdp] {
            let r = a.bound(method, 2, &FpsdpOptions::default()).unwrap();
            assert!(
                (r.l_upper + r.l_lower).abs() <= 1e-6 * r.l_upper.abs(),
                "{method}: {} {}",
                r.l_upper,
                r.l_lower
            );
            assert!(r.final_bound <= r.l_k && r.final_bound >= 0.0);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nlopt".parse::<Method>().is_err());
    }
}
