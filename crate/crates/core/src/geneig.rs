//! Generalized-eigenvalue hierarchy: the smallest `lambda` with
//! `lambda M_k(z) >= M_k(p z)` bounds `max p` from below and increases with `k`.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::float::next_down;
use crate::interval::BoxDomain;
use crate::linalg::{gen_eig_max, psd_check, to_f64_matrix, LinalgError};
use crate::moments::{binomial, localizing_matrix_in, orthonormal_localizing, MonomialBasis};
use crate::poly::Polynomial;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneigError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("moment matrix dimension {dim} exceeds the limit of {limit}")]
    TooLarge { dim: usize, limit: usize },
}

/// Largest moment-matrix dimension attempted; dense storage grows with its square.
pub const MAX_DIMENSION: usize = 6000;

/// Relative certification tolerance against `||M_k(p z)||_2`.
pub const CERT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct GeneigResult {
    pub k: u32,
    /// Certified lower bound on `max p`.
    pub bound: f64,
    /// Largest generalized eigenvalue before correction.
    pub raw_bound: f64,
    /// Smallest eigenvalue of `bound M_k(z) - M_k(p z)`.
    pub residual: f64,
    pub tolerance: f64,
    pub certified: bool,
    pub dimension: usize,
    pub seconds: f64,
}

/// Applies the correction rule to a raw eigenvalue bound.
///
/// `residual_at` returns the smallest eigenvalue of `lambda M - B`; `m_min`
/// is the smallest eigenvalue of `M`.
pub(crate) fn certify<F>(
    raw: f64,
    m_min: f64,
    tol: f64,
    mut residual_at: F,
) -> Result<(f64, f64, bool), LinalgError>
where
    F: FnMut(f64) -> Result<f64, LinalgError>,
{
    let r0 = residual_at(raw)?;
    let shifted = if r0 < 0.0 { raw + r0 / m_min } else { raw };
    let bound = next_down(shifted);
    let residual = residual_at(bound)?;
    Ok((bound, residual, residual >= -tol))
}

/// Computes `lambda_k(p)` on `domain`, working on the rescaled unit box.
pub fn geneig_bound(
    p: &Polynomial,
    domain: &BoxDomain,
    k: u32,
) -> Result<GeneigResult, GeneigError> {
    if k == 0 {
        return Err(GeneigError::ZeroOrder);
    }
    let start = Instant::now();
    check_full_dimensional(domain)?;
    let dim = binomial(domain.dim() as u64 + k as u64, k as u64);
    if dim > MAX_DIMENSION as u128 {
        return Err(GeneigError::TooLarge {
            dim: dim.min(usize::MAX as u128) as usize,
            limit: MAX_DIMENSION,
        });
    }
    let unit = domain.to_unit(p);
    let basis = MonomialBasis::new(domain.dim(), k);
    let b = orthonormal_localizing(&unit, &basis);
    let d = basis.len();
    let eigs = crate::linalg::sym_eigvals(&b)?;
    let raw = *eigs.last().unwrap();
    let norm = eigs.first().unwrap().abs().max(raw.abs());
    let tol = CERT_REL_TOL * norm;
    let ident = DMatrix::<f64>::identity(d, d);
    let (bound, residual, certified) = certify(raw, 1.0, tol, |lam| {
        Ok(psd_check(&(&ident * lam - &b), tol)?.min_eig)
    })?;
    Ok(GeneigResult {
        k,
        bound,
        raw_bound: raw,
        residual,
        tolerance: tol,
        certified,
        dimension: d,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// The same bound computed from exact monomial-basis matrices and a Cholesky reduction.
pub fn geneig_bound_monomial(
    p: &Polynomial,
    domain: &BoxDomain,
    k: u32,
) -> Result<GeneigResult, GeneigError> {
    if k == 0 {
        return Err(GeneigError::ZeroOrder);
    }
    let start = Instant::now();
    check_full_dimensional(domain)?;
    let unit_box = BoxDomain::unit(domain.dim());
    let unit = domain.to_unit(p);
    let basis = MonomialBasis::new(domain.dim(), k);
    let m = to_f64_matrix(&localizing_matrix_in(
        &Polynomial::one(domain.dim()),
        &basis,
        &unit_box,
    ));
    let b = to_f64_matrix(&localizing_matrix_in(&unit, &basis, &unit_box));
    let raw = gen_eig_max(&b, &m)?;
    let b_eigs = crate::linalg::sym_eigvals(&b)?;
    let norm = b_eigs
        .first()
        .unwrap()
        .abs()
        .max(b_eigs.last().unwrap().abs());
    let tol = CERT_REL_TOL * norm;
    let m_min = crate::linalg::sym_eigvals(&m)?[0];
    let (bound, residual, certified) = certify(raw, m_min, tol, |lam| {
        Ok(psd_check(&(&m * lam - &b), tol)?.min_eig)
    })?;
    Ok(GeneigResult {
        k,
        bound,
        raw_bound: raw,
        residual,
        tolerance: tol,
        certified,
        dimension: basis.len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub(crate) fn check_full_dimensional(domain: &BoxDomain) -> Result<(), LinalgError> {
    for i in 0..domain.dim() {
        if domain.lo[i] == domain.hi[i] {
            return Err(LinalgError::NotPositiveDefinite { row: i, pivot: 0.0 });
        }
    }
    Ok(())
}
