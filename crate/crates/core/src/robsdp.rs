//! Robust SDP hierarchy for `max l(x, e)` with `l = sum_j e_j s_j(x)` linear in
//! `e in [-1, 1]^m` (the roundoff `eps` is absorbed into `s_j`).
//!
//! The robust constraint is replaced by the LMI
//! `[[lambda M - tau L L^T, R^T], [R, tau I]] >= 0` where
//! `M_k(s_j z) = 2 L_j R_j`. For `tau > 0` it holds iff
//! `lambda M >= tau L L^T + R^T R / tau`, so the optimal `lambda` is
//! `min_tau lambda_max(tau A + B / tau)` in the basis where `M = I`; the map
//! `log tau -> lambda_max(...)` is convex and is minimized by golden section.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::float::Rational;
use crate::geneig::{certify, CERT_REL_TOL};
use crate::interval::BoxDomain;
use crate::linalg::{
    full_rank_factorization, psd_check, sym_eig, sym_eigvals, FullRankFactors, LinalgError,
};
use crate::moments::{legendre_localizing_exact, orthonormal_localizing, MonomialBasis};
use crate::poly::Polynomial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobsdpError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(
        "tau search did not bracket a minimizer after {doublings} doublings (last lambda {last})"
    )]
    IterationCap { doublings: usize, last: f64 },
    #[error("order must be at least 1")]
    ZeroOrder,
}

/// One nonzero localizing block.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub j: usize,
    pub rank: usize,
    /// Exact `2 L R` factors of the block in the unnormalized Legendre basis.
    pub exact: FullRankFactors,
    /// Float factors with `2 L R` equal to the orthonormal-basis block.
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct RobustLmi {
    pub n: usize,
    pub k: u32,
    /// `M_k(z)` in the working basis; the identity.
    pub moment: DMatrix<f64>,
    pub blocks: Vec<LmiBlock>,
    /// `[L_1 ... L_m]`, `d x sum r_j`.
    pub l: DMatrix<f64>,
    /// `[R_1; ...; R_m]`, `sum r_j x d`.
    pub r: DMatrix<f64>,
}

impl RobustLmi {
    pub fn moment_dim(&self) -> usize {
        self.moment.nrows()
    }

    pub fn total_rank(&self) -> usize {
        self.blocks.iter().map(|b| b.rank).sum()
    }

    /// Side length of the full LMI.
    pub fn block_dim(&self) -> usize {
        self.moment_dim() + self.total_rank()
    }

    /// The full LMI matrix at `(lambda, tau)`.
    pub fn assemble(&self, lambda: f64, tau: f64) -> DMatrix<f64> {
        let d = self.moment_dim();
        let t = self.total_rank();
        let mut out = DMatrix::<f64>::zeros(d + t, d + t);
        let top = &self.moment * lambda - (&self.l * self.l.transpose()) * tau;
        out.view_mut((0, 0), (d, d)).copy_from(&top);
        out.view_mut((d, 0), (t, d)).copy_from(&self.r);
        out.view_mut((0, d), (d, t)).copy_from(&self.r.transpose());
        out.view_mut((d, d), (t, t))
            .copy_from(&(DMatrix::<f64>::identity(t, t) * tau));
        out
    }

    /// Same LMI with every `s_j` negated.
    pub fn negated(&self) -> RobustLmi {
        let mut out = self.clone();
        out.r = -&self.r;
        for b in &mut out.blocks {
            b.r = -&b.r;
            b.exact.r = b.exact.r.scale(&Rational::from_integer((-1).into()));
        }
        out
    }
}

/// Builds the LMI for `eps * s_j` over `domain` at order `k`.
pub fn build_robust_lmi(
    s_list: &[Polynomial],
    domain: &BoxDomain,
    eps: &Rational,
    k: u32,
) -> RobustLmi {
    let n = domain.dim();
    let basis = MonomialBasis::new(n, k);
    let d = basis.len();
    let mut blocks = Vec::new();
    for (j, s) in s_list.iter().enumerate() {
        if s.is_zero() {
            continue;
        }
        let q = domain.to_unit(s).scale(eps);
        let exact = full_rank_factorization(&legendre_localizing_exact(&q, &basis));
        if exact.rank == 0 {
            continue;
        }
        let g = orthonormal_localizing(&q, &basis);
        let (values, vectors) = sym_eig(&g).expect("finite symmetric block");
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
        let keep = &order[..exact.rank];
        let mut l = DMatrix::<f64>::zeros(d, exact.rank);
        let mut r = DMatrix::<f64>::zeros(exact.rank, d);
        for (c, &idx) in keep.iter().enumerate() {
            let w = (values[idx].abs() / 2.0).sqrt();
            let sign = if values[idx] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..d {
                l[(i, c)] = vectors[(i, idx)] * w;
                r[(c, i)] = sign * w * vectors[(i, idx)];
            }
        }
        blocks.push(LmiBlock {
            j,
            rank: exact.rank,
            exact,
            l,
            r,
        });
    }
    let total: usize = blocks.iter().map(|b| b.rank).sum();
    let mut l = DMatrix::<f64>::zeros(d, total);
    let mut r = DMatrix::<f64>::zeros(total, d);
    let mut off = 0;
    for b in &blocks {
        l.view_mut((0, off), (d, b.rank)).copy_from(&b.l);
        r.view_mut((off, 0), (b.rank, d)).copy_from(&b.r);
        off += b.rank;
    }
    RobustLmi {
        n,
        k,
        moment: DMatrix::identity(d, d),
        blocks,
        l,
        r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobsdpOptions {
    /// Stop when the bracket on `tau` is this narrow relative to `tau`.
    pub tau_gap: f64,
    pub max_doublings: usize,
}

impl Default for RobsdpOptions {
    fn default() -> Self {
        RobsdpOptions {
            tau_gap: 1e-8,
            max_doublings: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobsdpResult {
    pub k: u32,
    /// Certified lower bound on `max l`.
    pub bound: f64,
    pub raw_bound: f64,
    pub tau: f64,
    /// Smallest eigenvalue of `bound M - tau A - B / tau` (zero rows removed).
    pub residual: f64,
    pub tolerance: f64,
    pub certified: bool,
    /// The raw optimum exceeded `lambda_hi` and was capped.
    pub capped: bool,
    pub block_dim: usize,
    pub seconds: f64,
}

pub fn robsdp_bound(lmi: &RobustLmi, lambda_hi: f64) -> Result<RobsdpResult, RobsdpError> {
    robsdp_bound_with(lmi, lambda_hi, RobsdpOptions::default())
}

pub fn robsdp_bound_with(
    lmi: &RobustLmi,
    lambda_hi: f64,
    opts: RobsdpOptions,
) -> Result<RobsdpResult, RobsdpError> {
    let start = Instant::now();
    let d = lmi.moment_dim();
    if lmi.total_rank() == 0 {
        return Ok(RobsdpResult {
            k: lmi.k,
            bound: 0.0,
            raw_bound: 0.0,
            tau: 0.0,
            residual: 0.0,
            tolerance: 0.0,
            certified: true,
            capped: false,
            block_dim: lmi.block_dim(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let a = &lmi.l * lmi.l.transpose();
    let b = lmi.r.transpose() * &lmi.r;
    let objective = |t: f64| -> Result<f64, LinalgError> {
        let m = &a * t.exp() + &b * (-t).exp();
        Ok(*sym_eigvals(&m)?.last().unwrap())
    };
    let tau_max = 1.0 + lmi.r.norm_squared();
    let mut hi = tau_max.ln();
    let mut lo = -hi;
    let mut doublings = 0;
    let (t_star, lam_star) = loop {
        let (t, v) = golden_section(&objective, lo, hi, opts.tau_gap)?;
        let span = hi - lo;
        let near_hi = hi - t < 1e-3 * span;
        let near_lo = t - lo < 1e-3 * span;
        if !near_hi && !near_lo {
            break (t, v);
        }
        if doublings >= opts.max_doublings {
            return Err(RobsdpError::IterationCap { doublings, last: v });
        }
        doublings += 1;
        if near_hi {
            hi += std::f64::consts::LN_2.max(span);
        }
        if near_lo {
            lo -= std::f64::consts::LN_2.max(span);
        }
    };
    let tau = t_star.exp();
    let raw = lam_star.max(0.0);
    let ident = DMatrix::<f64>::identity(d, d);
    let pressure = &a * tau + &b / tau;
    let norm = sym_eigvals(&pressure)?.last().copied().unwrap_or(0.0).abs();
    let tol = CERT_REL_TOL * norm.max(f64::MIN_POSITIVE);
    let (mut bound, mut residual, mut certified) = certify(raw, 1.0, tol, |lam| {
        Ok(psd_check(&(&ident * lam - &pressure), tol)?.min_eig)
    })?;
    let capped = bound > lambda_hi;
    if capped {
        bound = lambda_hi;
        residual = psd_check(&(&ident * bound - &pressure), tol)?.min_eig;
        certified = false;
    }
    Ok(RobsdpResult {
        k: lmi.k,
        bound: bound.max(0.0),
        raw_bound: raw,
        tau,
        residual,
        tolerance: tol,
        certified,
        capped,
        block_dim: lmi.block_dim(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Minimizes a unimodal function on `[lo, hi]`; returns the best point and value.
fn golden_section<F>(f: &F, mut lo: f64, mut hi: f64, gap: f64) -> Result<(f64, f64), LinalgError>
where
    F: Fn(f64) -> Result<f64, LinalgError>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    // A gap in log(tau) is a relative gap in tau.
    while hi - lo > gap {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Runs both steps for `eps * s_j` over `domain`.
pub fn robsdp_for(
    s_list: &[Polynomial],
    domain: &BoxDomain,
    eps: &Rational,
    k: u32,
    lambda_hi: f64,
) -> Result<RobsdpResult, RobsdpError> {
    if k == 0 {
        return Err(RobsdpError::ZeroOrder);
    }
    let lmi = build_robust_lmi(s_list, domain, eps, k);
    robsdp_bound(&lmi, lambda_hi)
}
