//! Beta-moment hierarchy: each pair `(eta, beta)` defines a beta density on the
//! unit box, and the expectation of `p` under it is at most `max p`. The
//! order-`k` bound is the largest such expectation over `|eta| + |beta| <= 2k`.
//!
//! Candidates are grouped by the set of coordinates where `(eta, beta)` is
//! nonzero. On coordinates outside that set the density is uniform, so `p` can
//! be marginalized once per support set and every pair with that support is
//! scored against the small marginal. Screening runs in `f64`; all pairs within
//! the rounding margin of the best score are rescored exactly.

use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::float::{to_f64, Rational, RoundMode};
use crate::interval::BoxDomain;
use crate::moments::{beta_moment_ratio, binomial};
use crate::poly::Polynomial;

pub const DEFAULT_BUDGET: u128 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MvbetaError {
    #[error("{count} candidate pairs exceed the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("order must be at least 1")]
    ZeroOrder,
}

#[derive(Debug, Clone, Serialize)]
pub struct MvbetaResult {
    pub k: u32,
    /// Exact optimum rounded toward negative infinity.
    pub bound: f64,
    #[serde(skip)]
    pub exact: Rational,
    pub eta: Vec<u16>,
    pub beta: Vec<u16>,
    pub candidates: u128,
    pub seconds: f64,
}

/// Number of pairs `(eta, beta)` in `2n` variables of total degree at most `2k`.
pub fn candidate_count(n: usize, k: u32) -> u128 {
    binomial(2 * n as u64 + 2 * k as u64, 2 * k as u64)
}

struct Term {
    alpha: Vec<u16>,
    weight: Rational,
    weight_f: f64,
}

/// `kappa(eta, beta, a) = (a + 1) prod_{t=1..a} (eta + t) / (eta + beta + t + 1)`.
fn kappa_exact(eta: u16, beta: u16, a: u16) -> Rational {
    beta_moment_ratio(&[eta], &[beta], &[a]) * Rational::from_integer(BigInt::from(a as u32 + 1))
}

pub fn mvbeta_bound(
    p: &Polynomial,
    domain: &BoxDomain,
    k: u32,
    budget: u128,
) -> Result<MvbetaResult, MvbetaError> {
    if k == 0 {
        return Err(MvbetaError::ZeroOrder);
    }
    let n = domain.dim();
    let count = candidate_count(n, k);
    if count > budget {
        return Err(MvbetaError::BudgetExceeded { count, budget });
    }
    let start = Instant::now();
    let unit = domain.to_unit(p);
    let two_k = 2 * k as u16;
    let terms: Vec<Term> = unit
        .terms()
        .map(|(m, c)| {
            let denom: BigInt = m.iter().map(|&a| BigInt::from(a as u32 + 1)).product();
            let weight = c / Rational::from_integer(denom);
            let weight_f = weight.to_f64().unwrap();
            Term {
                alpha: m.clone(),
                weight,
                weight_f,
            }
        })
        .collect();
    let max_deg = (0..n)
        .map(|i| unit.degree_in(i) as usize)
        .max()
        .unwrap_or(0);
    let kappa_f: Vec<Vec<Vec<f64>>> = (0..=two_k)
        .map(|e| {
            (0..=two_k)
                .map(|b| {
                    (0..=max_deg as u16)
                        .map(|a| kappa_exact(e, b, a).to_f64().unwrap())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut by_coord: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, term) in terms.iter().enumerate() {
        for (i, &a) in term.alpha.iter().enumerate() {
            if a > 0 {
                by_coord[i].push(t);
            }
        }
    }
    let mean_f: f64 = terms.iter().map(|t| t.weight_f).sum();
    let l1: f64 = unit.terms().map(|(_, c)| c.to_f64().unwrap().abs()).sum();
    let margin = 1e-11 * l1 + f64::MIN_POSITIVE;

    let mut best = f64::NEG_INFINITY;
    let mut survivors: Vec<(f64, Vec<usize>, Vec<(u16, u16)>)> = Vec::new();
    let mut stamp = vec![usize::MAX; terms.len()];
    let mut serial = 0usize;
    let max_support = (2 * k as usize).min(n);
    for size in 0..=max_support {
        let mut support: Vec<usize> = (0..size).collect();
        loop {
            serial += 1;
            // Marginal of p on the support: exponent restricted to S -> weight.
            let mut marginal: FxHashMap<Vec<u16>, f64> = FxHashMap::default();
            let mut rest = mean_f;
            for &i in &support {
                for &t in &by_coord[i] {
                    if stamp[t] == serial {
                        continue;
                    }
                    stamp[t] = serial;
                    let key: Vec<u16> = support.iter().map(|&s| terms[t].alpha[s]).collect();
                    rest -= terms[t].weight_f;
                    *marginal.entry(key).or_insert(0.0) += terms[t].weight_f;
                }
            }
            let marginal: Vec<(Vec<u16>, f64)> = std::iter::once((vec![0u16; size], rest))
                .chain(marginal)
                .collect();
            let mut pairs: Vec<(u16, u16)> = vec![(0, 0); size];
            enumerate_pairs(&mut pairs, 0, two_k, &mut |pairs| {
                let v: f64 = marginal
                    .iter()
                    .map(|(key, w)| {
                        let mut f = *w;
                        for (s, &(e, b)) in pairs.iter().enumerate() {
                            f *= kappa_f[e as usize][b as usize][key[s] as usize];
                        }
                        f
                    })
                    .sum();
                if v > best {
                    best = v;
                    survivors.retain(|s| s.0 >= best - margin);
                }
                if v >= best - margin {
                    survivors.push((v, support.clone(), pairs.to_vec()));
                }
            });
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }
    survivors.retain(|s| s.0 >= best - margin);

    let mut winner: Option<(Rational, Vec<u16>, Vec<u16>)> = None;
    for (_, support, pairs) in survivors {
        let mut eta = vec![0u16; n];
        let mut beta = vec![0u16; n];
        for (s, &(e, b)) in support.iter().zip(&pairs) {
            eta[*s] = e;
            beta[*s] = b;
        }
        let v = quotient_sum_exact(&terms, &eta, &beta);
        let better = match &winner {
            None => true,
            Some((w, _, _)) => v > *w,
        };
        if better {
            winner = Some((v, eta, beta));
        }
    }
    let (exact, eta, beta) = winner.expect("the zero pair is always a candidate");
    Ok(MvbetaResult {
        k,
        bound: to_f64(&exact, RoundMode::Down),
        exact,
        eta,
        beta,
        candidates: count,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Every assignment with `eta_s + beta_s >= 1` on each slot and total at most `budget`.
fn enumerate_pairs<F: FnMut(&[(u16, u16)])>(
    pairs: &mut Vec<(u16, u16)>,
    pos: usize,
    budget: u16,
    visit: &mut F,
) {
    if pos == pairs.len() {
        visit(pairs);
        return;
    }
    let slots_left = (pairs.len() - pos - 1) as u16;
    if budget < slots_left + 1 {
        return;
    }
    for total in 1..=budget - slots_left {
        for e in (0..=total).rev() {
            pairs[pos] = (e, total - e);
            enumerate_pairs(pairs, pos + 1, budget - total, visit);
        }
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn quotient_sum_exact(terms: &[Term], eta: &[u16], beta: &[u16]) -> Rational {
    let mut total = Rational::zero();
    for t in terms {
        let mut f = t.weight.clone();
        for (i, &a) in t.alpha.iter().enumerate() {
            if a > 0 && (eta[i] > 0 || beta[i] > 0) {
                f *= kappa_exact(eta[i], beta[i], a);
            }
        }
        total += f;
    }
    total
}

/// The expectation of `p` under the beta density `(eta, beta)` on the rescaled box.
pub fn quotient_sum(p: &Polynomial, domain: &BoxDomain, eta: &[u16], beta: &[u16]) -> Rational {
    let unit = domain.to_unit(p);
    unit.terms().fold(Rational::zero(), |acc, (m, c)| {
        acc + c * beta_moment_ratio(eta, beta, m)
    })
}
