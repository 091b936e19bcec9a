//! Moments of the uniform measure on boxes, beta moments and localizing matrices.
//!
//! Two assemblies of the localizing matrix `M_k(q z)` are provided. The exact
//! one works in the monomial basis over any box. The orthonormal one works on
//! the unit box in the basis of products of normalized shifted Legendre
//! polynomials, where the moment matrix becomes the identity; it is related to
//! the monomial assembly by an exact congruence and is the one used for
//! numerics at higher orders.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rustc_hash::FxHashMap;

use crate::float::Rational;
use crate::interval::BoxDomain;
use crate::linalg::RationalMatrix;
use crate::poly::{Monomial, Polynomial};

/// All exponents of total degree at most `k` in `n` variables, graded, then
/// lexicographically decreasing within a degree: `1, y1, y2, y1^2, y1 y2, y2^2`.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub n: usize,
    pub k: u32,
    pub elems: Vec<Monomial>,
    index: FxHashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(n: usize, k: u32) -> Self {
        let mut elems = Vec::new();
        for d in 0..=k {
            let mut cur = vec![0u16; n];
            push_degree(&mut elems, &mut cur, 0, d);
        }
        let index = elems
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        MonomialBasis { n, k, elems, index }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, m: &[u16]) -> Option<usize> {
        self.index.get(m).copied()
    }
}

fn push_degree(out: &mut Vec<Monomial>, cur: &mut Vec<u16>, pos: usize, remaining: u32) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == cur.len() - 1 {
        cur[pos] = remaining as u16;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v as u16;
        push_degree(out, cur, pos + 1, remaining - v);
    }
    cur[pos] = 0;
}

/// `C(n, k)` as a 128-bit integer.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `int_box y^alpha dy`.
pub fn box_moment(alpha: &[u16], domain: &BoxDomain) -> Rational {
    assert_eq!(alpha.len(), domain.dim(), "dimension mismatch");
    let mut acc = Rational::one();
    for (i, &a) in alpha.iter().enumerate() {
        let e = a as usize + 1;
        let hi = num_traits::pow(domain.hi[i].clone(), e);
        let lo = num_traits::pow(domain.lo[i].clone(), e);
        acc *= (hi - lo) / Rational::from_integer(BigInt::from(e));
    }
    acc
}

/// `L_z(p) = sum_alpha p_alpha z_alpha` for the uniform measure on the box.
pub fn linear_functional(p: &Polynomial, domain: &BoxDomain) -> Rational {
    p.terms().fold(Rational::zero(), |acc, (m, c)| {
        acc + c * box_moment(m, domain)
    })
}

/// Exact `M_k(q z)` in the monomial basis.
pub fn localizing_matrix(q: &Polynomial, k: u32, domain: &BoxDomain) -> RationalMatrix {
    let basis = MonomialBasis::new(domain.dim(), k);
    localizing_matrix_in(q, &basis, domain)
}

pub fn localizing_matrix_in(
    q: &Polynomial,
    basis: &MonomialBasis,
    domain: &BoxDomain,
) -> RationalMatrix {
    assert_eq!(q.nvars(), domain.dim(), "dimension mismatch");
    let d = basis.len();
    let mut cache: FxHashMap<Monomial, Rational> = FxHashMap::default();
    let mut moment = |m: Monomial| -> Rational {
        cache
            .entry(m)
            .or_insert_with_key(|m| box_moment(m, domain))
            .clone()
    };
    let mut out = RationalMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut v = Rational::zero();
            for (a, c) in q.terms() {
                let m: Monomial = (0..basis.n)
                    .map(|t| a[t] + basis.elems[i][t] + basis.elems[j][t])
                    .collect();
                v += c * moment(m);
            }
            out.set(i, j, v.clone());
            out.set(j, i, v);
        }
    }
    out
}

pub fn moment_matrix(k: u32, domain: &BoxDomain) -> RationalMatrix {
    localizing_matrix(&Polynomial::one(domain.dim()), k, domain)
}

/// `gamma_{eta+alpha, beta} / gamma_{eta, beta}` on the unit box.
pub fn beta_moment_ratio(eta: &[u16], beta: &[u16], alpha: &[u16]) -> Rational {
    assert!(
        eta.len() == beta.len() && beta.len() == alpha.len(),
        "dimension mismatch"
    );
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..eta.len() {
        let (e, b) = (eta[i] as u64, beta[i] as u64);
        for t in 1..=alpha[i] as u64 {
            num *= e + t;
            den *= e + b + t + 1;
        }
    }
    Rational::new(num, den)
}

/// Moments and localizing matrices on one box for a fixed order.
#[derive(Debug, Clone)]
pub struct MomentMatrixSet {
    pub basis: MonomialBasis,
    pub domain: BoxDomain,
    pub moment: RationalMatrix,
    pub localizing: Vec<RationalMatrix>,
}

impl MomentMatrixSet {
    pub fn new(domain: &BoxDomain, k: u32, qs: &[Polynomial]) -> Self {
        let basis = MonomialBasis::new(domain.dim(), k);
        let moment = localizing_matrix_in(&Polynomial::one(domain.dim()), &basis, domain);
        let localizing = qs
            .iter()
            .map(|q| localizing_matrix_in(q, &basis, domain))
            .collect();
        MomentMatrixSet {
            basis,
            domain: domain.clone(),
            moment,
            localizing,
        }
    }
}

/// Coefficients of the shifted Legendre polynomial `P_a(2y - 1)`, lowest degree first.
pub fn shifted_legendre(a: usize) -> Vec<BigInt> {
    (0..=a)
        .map(|i| {
            let c = binomial(a as u64, i as u64) * binomial((a + i) as u64, i as u64);
            let v = BigInt::from(c);
            if (a + i) % 2 == 1 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Exact `T[g][a][b] = int_0^1 y^g P_a(2y-1) P_b(2y-1) dy`, zero when `|a-b| > g`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    pub kmax: usize,
    pub gmax: usize,
    exact: Vec<Vec<Vec<Rational>>>,
    normalized: Vec<Vec<Vec<f64>>>,
}

impl LegendreTable {
    pub fn new(kmax: usize, gmax: usize) -> Self {
        let polys: Vec<Vec<BigInt>> = (0..=kmax).map(shifted_legendre).collect();
        let mut exact = vec![vec![vec![Rational::zero(); kmax + 1]; kmax + 1]; gmax + 1];
        let mut normalized = vec![vec![vec![0.0; kmax + 1]; kmax + 1]; gmax + 1];
        for g in 0..=gmax {
            for a in 0..=kmax {
                for b in a..=kmax {
                    if b - a > g {
                        continue;
                    }
                    let mut v = Rational::zero();
                    for (i, ca) in polys[a].iter().enumerate() {
                        for (j, cb) in polys[b].iter().enumerate() {
                            v += Rational::new(ca * cb, BigInt::from(g + i + j + 1));
                        }
                    }
                    let scale = (((2 * a + 1) * (2 * b + 1)) as f64).sqrt();
                    let f = v.to_f64().unwrap() * scale;
                    exact[g][a][b] = v.clone();
                    exact[g][b][a] = v;
                    normalized[g][a][b] = f;
                    normalized[g][b][a] = f;
                }
            }
        }
        LegendreTable {
            kmax,
            gmax,
            exact,
            normalized,
        }
    }

    pub fn exact(&self, g: usize, a: usize, b: usize) -> &Rational {
        &self.exact[g][a][b]
    }

    /// Entry for the normalized basis `sqrt(2a+1) P_a(2y-1)`.
    pub fn normalized(&self, g: usize, a: usize, b: usize) -> f64 {
        self.normalized[g][a][b]
    }
}

/// Shared tables keyed by `(kmax, gmax)`.
pub fn legendre_table(kmax: usize, gmax: usize) -> Arc<LegendreTable> {
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<FxHashMap<(usize, usize), Arc<LegendreTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().unwrap().get(&(kmax, gmax)) {
        return t.clone();
    }
    let t = Arc::new(LegendreTable::new(kmax, gmax));
    cache.lock().unwrap().insert((kmax, gmax), t.clone());
    t
}

/// Visits every `(i, j, factors)` coupling of basis elements through the terms of `q`.
fn for_each_coupling<F>(q: &Polynomial, basis: &MonomialBasis, mut visit: F)
where
    F: FnMut(usize, usize, &Rational, &[(usize, u16, u16, u16)]),
{
    let k = basis.k as i32;
    let terms: Vec<(Vec<(usize, u16)>, &Rational)> = q
        .terms()
        .map(|(m, c)| {
            (
                m.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| (i, e))
                    .collect(),
                c,
            )
        })
        .collect();
    let mut gamma: Vec<u16> = vec![0; basis.n];
    let mut factors: Vec<(usize, u16, u16, u16)> = Vec::new();
    for (i, beta) in basis.elems.iter().enumerate() {
        let beta_deg: i32 = beta.iter().map(|&e| e as i32).sum();
        for (support, c) in &terms {
            gamma.copy_from_slice(beta);
            let free: i32 = beta_deg - support.iter().map(|&(v, _)| beta[v] as i32).sum::<i32>();
            factors.clear();
            enumerate_neighbors(
                support,
                beta,
                0,
                k - free,
                &mut gamma,
                &mut factors,
                &mut |g, f| {
                    if let Some(j) = basis.index_of(g) {
                        visit(i, j, c, f);
                    }
                },
            );
        }
    }
}

fn enumerate_neighbors<F>(
    support: &[(usize, u16)],
    beta: &[u16],
    pos: usize,
    budget: i32,
    gamma: &mut Vec<u16>,
    factors: &mut Vec<(usize, u16, u16, u16)>,
    visit: &mut F,
) where
    F: FnMut(&[u16], &[(usize, u16, u16, u16)]),
{
    if pos == support.len() {
        visit(gamma, factors);
        return;
    }
    let (v, g) = support[pos];
    let b = beta[v] as i32;
    let lo = (b - g as i32).max(0);
    let hi = (b + g as i32).min(budget);
    for c in lo..=hi {
        gamma[v] = c as u16;
        factors.push((v, g, beta[v], c as u16));
        enumerate_neighbors(support, beta, pos + 1, budget - c, gamma, factors, visit);
        factors.pop();
    }
    gamma[v] = beta[v];
}

/// `M_k(q z)` on the unit box in the orthonormal product Legendre basis.
///
/// With `Q` the change of basis, this equals `Q M_k(q z) Q^T` where
/// `Q M_k(z) Q^T = I`.
pub fn orthonormal_localizing(q: &Polynomial, basis: &MonomialBasis) -> DMatrix<f64> {
    let d = basis.len();
    let gmax = (0..q.nvars())
        .map(|i| q.degree_in(i) as usize)
        .max()
        .unwrap_or(0);
    let table = legendre_table(basis.k as usize, gmax);
    let mut out = DMatrix::<f64>::zeros(d, d);
    for_each_coupling(q, basis, |i, j, c, factors| {
        if j < i {
            return;
        }
        let mut v = c.to_f64().unwrap();
        for &(_, g, a, b) in factors {
            v *= table.normalized(g as usize, a as usize, b as usize);
        }
        out[(i, j)] += v;
    });
    for i in 0..d {
        for j in 0..i {
            out[(i, j)] = out[(j, i)];
        }
    }
    out
}

/// Exact `int q P_beta P_gamma` on the unit box, with `P_beta` the product of
/// unnormalized shifted Legendre polynomials; congruent to `M_k(q z)`.
pub fn legendre_localizing_exact(q: &Polynomial, basis: &MonomialBasis) -> RationalMatrix {
    let d = basis.len();
    let gmax = (0..q.nvars())
        .map(|i| q.degree_in(i) as usize)
        .max()
        .unwrap_or(0);
    let table = legendre_table(basis.k as usize, gmax);
    let diag: Vec<Rational> = (0..=basis.k as usize)
        .map(|a| table.exact(0, a, a).clone())
        .collect();
    let mut out = RationalMatrix::zeros(d, d);
    for_each_coupling(q, basis, |i, j, c, factors| {
        if j < i {
            return;
        }
        let mut v = c.clone();
        for &(_, g, a, b) in factors {
            v *= table.exact(g as usize, a as usize, b as usize);
        }
        // Coordinates outside the term's support contribute int P_a^2.
        let touched: Vec<usize> = factors.iter().map(|f| f.0).collect();
        for (t, &e) in basis.elems[i].iter().enumerate() {
            if !touched.contains(&t) {
                v *= &diag[e as usize];
            }
        }
        let cur = out.get(i, j).clone();
        out.set(i, j, cur + v);
    });
    for i in 0..d {
        for j in 0..i {
            let v = out.get(j, i).clone();
            out.set(i, j, v);
        }
    }
    out
}

/// Change of basis `Q` (rows: normalized Legendre products, columns: monomials).
pub fn orthonormal_change_of_basis(basis: &MonomialBasis) -> DMatrix<f64> {
    let d = basis.len();
    let polys: Vec<Vec<BigInt>> = (0..=basis.k as usize).map(shifted_legendre).collect();
    let mut q = DMatrix::<f64>::zeros(d, d);
    for (i, beta) in basis.elems.iter().enumerate() {
        let mut terms: Vec<(Vec<u16>, f64)> = vec![(vec![0; basis.n], 1.0)];
        for (v, &a) in beta.iter().enumerate() {
            let norm = ((2 * a as usize + 1) as f64).sqrt();
            let mut next = Vec::new();
            for (m, c) in &terms {
                for (deg, coef) in polys[a as usize].iter().enumerate() {
                    let mut m2 = m.clone();
                    m2[v] = deg as u16;
                    next.push((m2, c * coef.to_f64().unwrap() * norm));
                }
            }
            terms = next;
        }
        for (m, c) in terms {
            let j = basis.index_of(&m).expect("degree stays within k");
            q[(i, j)] += c;
        }
    }
    q
}
