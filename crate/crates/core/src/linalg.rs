//! Dense symmetric kernels and exact rational factorization.

use nalgebra::DMatrix;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::float::Rational;

/// Dense symmetric matrix; callers keep both triangles equal.
pub type SymMatrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}x{0} against {1}x{1}")]
    Dimension(usize, usize),
}

/// Row-major matrix of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RationalMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for t in 0..self.cols {
                let a = self.get(i, t);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(t, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> RationalMatrix {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

pub fn to_f64_matrix(m: &RationalMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        m.get(i, j).to_f64().unwrap_or(f64::NAN)
    })
}

/// Lower-triangular `C` with `A = C C^T`.
pub fn cholesky(a: &SymMatrix) -> Result<DMatrix<f64>, LinalgError> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for t in 0..j {
            d -= c[(j, t)] * c[(j, t)];
        }
        if d.is_nan() || d <= tol {
            return Err(LinalgError::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        c[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for t in 0..j {
                s -= c[(i, t)] * c[(j, t)];
            }
            c[(i, j)] = s / djj;
        }
    }
    Ok(c)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigvals(a: &SymMatrix) -> Result<Vec<f64>, LinalgError> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NoConvergence(0));
    }
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    Ok(v)
}

/// Ascending eigenvalues with orthonormal eigenvectors as matching columns.
pub fn sym_eig(a: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>), LinalgError> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NoConvergence(0));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Cyclic Jacobi eigensolver: ascending eigenvalues and eigenvector columns.
pub fn jacobi_eig(a: &SymMatrix) -> Result<(Vec<f64>, DMatrix<f64>), LinalgError> {
    const MAX_SWEEPS: usize = 100;
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence(MAX_SWEEPS));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Largest `lambda` with `det(B - lambda A) = 0`, for `A` positive definite.
pub fn gen_eig_max(b: &SymMatrix, a: &SymMatrix) -> Result<f64, LinalgError> {
    if a.nrows() != b.nrows() {
        return Err(LinalgError::Dimension(b.nrows(), a.nrows()));
    }
    let c = cholesky(a)?;
    // X = C^{-1} B C^{-T}
    let y = c
        .solve_lower_triangular(b)
        .ok_or(LinalgError::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let x = c
        .solve_lower_triangular(&y.transpose())
        .ok_or(LinalgError::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    let sym = (&x + x.transpose()) * 0.5;
    Ok(*sym_eigvals(&sym)?.last().unwrap_or(&f64::NEG_INFINITY))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub min_eig: f64,
    pub ok: bool,
}

pub fn psd_check(a: &SymMatrix, tol: f64) -> Result<PsdCheck, LinalgError> {
    let min_eig = sym_eigvals(a)?.first().copied().unwrap_or(0.0);
    Ok(PsdCheck {
        min_eig,
        ok: min_eig >= -tol,
    })
}

/// `M = 2 L R` with `L` of size `d x r` and `R` of size `r x d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FullRankFactors {
    pub l: RationalMatrix,
    pub r: RationalMatrix,
    pub rank: usize,
}

impl FullRankFactors {
    pub fn reconstruct(&self) -> RationalMatrix {
        self.l.mul(&self.r).scale(&Rational::from_integer(2.into()))
    }
}

/// Exact symmetric elimination `M = sum_i d_i v_i v_i^T`, returned as `L = V`, `R = D V^T / 2`.
///
/// Pivots on the largest diagonal magnitude; when the remaining diagonal is
/// zero a nonzero off-diagonal pair is split into two rank-one terms.
pub fn full_rank_factorization(m: &RationalMatrix) -> FullRankFactors {
    let n = m.rows();
    assert_eq!(n, m.cols(), "matrix must be square");
    let mut a = m.clone();
    let mut terms: Vec<(Rational, Vec<Rational>)> = Vec::new();
    loop {
        let pivot = (0..n)
            .filter(|&i| !a.get(i, i).is_zero())
            .max_by(|&i, &j| a.get(i, i).abs().cmp(&a.get(j, j).abs()).then(j.cmp(&i)));
        if let Some(p) = pivot {
            let v: Vec<Rational> = (0..n).map(|i| a.get(i, p).clone()).collect();
            let d = a.get(p, p).recip();
            rank_one_update(&mut a, &d, &v);
            terms.push((d, v));
            continue;
        }
        let pair = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| !a.get(i, j).is_zero());
        let Some((i, j)) = pair else { break };
        let b = a.get(i, j).clone();
        let u: Vec<Rational> = (0..n).map(|t| a.get(t, i).clone()).collect();
        let w: Vec<Rational> = (0..n).map(|t| a.get(t, j).clone()).collect();
        let plus: Vec<Rational> = u.iter().zip(&w).map(|(x, y)| x + y).collect();
        let minus: Vec<Rational> = u.iter().zip(&w).map(|(x, y)| x - y).collect();
        let d = (Rational::from_integer(2.into()) * &b).recip();
        rank_one_update(&mut a, &d, &plus);
        rank_one_update(&mut a, &(-d.clone()), &minus);
        terms.push((d.clone(), plus));
        terms.push((-d, minus));
    }
    let rank = terms.len();
    let mut l = RationalMatrix::zeros(n, rank);
    let mut r = RationalMatrix::zeros(rank, n);
    let half = Rational::new(1.into(), 2.into());
    for (c, (d, v)) in terms.iter().enumerate() {
        let dh = d * &half;
        for i in 0..n {
            l.set(i, c, v[i].clone());
            r.set(c, i, &dh * &v[i]);
        }
    }
    FullRankFactors { l, r, rank }
}

/// `A -= d v v^T`.
fn rank_one_update(a: &mut RationalMatrix, d: &Rational, v: &[Rational]) {
    let n = v.len();
    let dv: Vec<Rational> = v.iter().map(|x| x * d).collect();
    for i in 0..n {
        if dv[i].is_zero() {
            continue;
        }
        for j in 0..n {
            if v[j].is_zero() {
                continue;
            }
            let cur = a.get(i, j) - &dv[i] * &v[j];
            a.set(i, j, cur);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn cholesky_examples() {
        let c = cholesky(&mat(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        assert!((c.clone() - mat(&[&[2.0, 0.0], &[1.0, 2f64.sqrt()]])).amax() < 1e-15);
        assert_eq!(
            cholesky(&DMatrix::identity(3, 3)).unwrap(),
            DMatrix::identity(3, 3)
        );
        assert!(matches!(
            cholesky(&mat(&[&[1.0, 2.0], &[2.0, 1.0]])),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn eigenvalue_examples() {
        let close = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(
            sym_eigvals(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                3.0, 1.0, 2.0
            ])))
            .unwrap(),
            &[1.0, 2.0, 3.0]
        ));
        assert!(close(
            sym_eigvals(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(),
            &[-1.0, 1.0]
        ));
        assert!(close(
            sym_eigvals(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap(),
            &[1.0, 3.0]
        ));
        assert!(close(
            jacobi_eig(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap().0,
            &[1.0, 3.0]
        ));
    }

    #[test]
    fn generalized_eigenvalue_examples() {
        assert!(
            (gen_eig_max(&mat(&[&[5.0, 0.0], &[0.0, 1.0]]), &DMatrix::identity(2, 2)).unwrap()
                - 5.0)
                .abs()
                < 1e-12
        );
        let b = mat(&[&[0.5, 1.0 / 3.0], &[1.0 / 3.0, 0.25]]);
        let a = mat(&[&[1.0, 0.5], &[0.5, 1.0 / 3.0]]);
        let want = (3.0 + 3f64.sqrt()) / 6.0;
        assert!((gen_eig_max(&b, &a).unwrap() - want).abs() < 1e-12);
        assert!((gen_eig_max(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_examples() {
        assert_eq!(
            psd_check(&DMatrix::identity(2, 2), 0.0).unwrap(),
            PsdCheck {
                min_eig: 1.0,
                ok: true
            }
        );
        let d = psd_check(&mat(&[&[1.0, 0.0], &[0.0, -1.0]]), 1e-12).unwrap();
        assert!(!d.ok && (d.min_eig + 1.0).abs() < 1e-15);
        assert!(psd_check(&DMatrix::zeros(2, 2), 0.0).unwrap().ok);
    }

    #[test]
    fn factorization_examples() {
        let ones = RationalMatrix::from_rows(vec![vec![q(1, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]]);
        let f = full_rank_factorization(&ones);
        assert_eq!(f.rank, 1);
        assert_eq!(
            f.l,
            RationalMatrix::from_rows(vec![vec![q(1, 1)], vec![q(1, 1)]])
        );
        assert_eq!(f.r, RationalMatrix::from_rows(vec![vec![q(1, 2), q(1, 2)]]));
        let zero = full_rank_factorization(&RationalMatrix::zeros(3, 3));
        assert_eq!((zero.rank, zero.l.cols(), zero.r.rows()), (0, 0, 0));
        let mx = RationalMatrix::from_rows(vec![vec![q(1, 2), q(1, 3)], vec![q(1, 3), q(1, 4)]]);
        let f = full_rank_factorization(&mx);
        assert_eq!(f.rank, 2);
        assert_eq!(f.reconstruct(), mx);
    }

    #[test]
    fn factorization_with_zero_diagonal() {
        let m = RationalMatrix::from_rows(vec![
            vec![q(0, 1), q(3, 1), q(1, 1)],
            vec![q(3, 1), q(0, 1), q(2, 1)],
            vec![q(1, 1), q(2, 1), q(0, 1)],
        ]);
        let f = full_rank_factorization(&m);
        assert_eq!(f.rank, 3);
        assert_eq!(f.reconstruct(), m);
        let hyperbolic =
            RationalMatrix::from_rows(vec![vec![q(0, 1), q(5, 7)], vec![q(5, 7), q(0, 1)]]);
        let f = full_rank_factorization(&hyperbolic);
        assert_eq!((f.rank, f.reconstruct()), (2, hyperbolic));
    }
}
