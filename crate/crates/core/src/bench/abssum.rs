//! Local search for `max_x eps sum_j |s_j(x)|` over the box.
//!
//! Multistart coordinate pattern search in `f64`; the incumbent is rescored in
//! exact arithmetic and rounded down, so the result is a certified lower bound
//! on the maximum.

use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::float::{rational_from_f64, to_f64, Rational, RoundMode};
use crate::interval::BoxDomain;
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct AbsSumResult {
    pub value: f64,
    pub exact: Rational,
    pub argmax: Vec<f64>,
    pub evaluations: usize,
}

/// Flattened `f64` copy of the `s_j` for fast evaluation.
struct Compiled {
    terms: Vec<Vec<(Vec<u16>, f64)>>,
}

impl Compiled {
    fn new(s_list: &[Polynomial]) -> Self {
        Compiled {
            terms: s_list
                .iter()
                .map(|s| {
                    s.terms()
                        .map(|(m, c)| (m.clone(), c.to_f64().unwrap()))
                        .collect()
                })
                .collect(),
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|s| {
                s.iter()
                    .map(|(m, c)| {
                        m.iter()
                            .zip(x)
                            .fold(*c, |acc, (&a, &xi)| acc * xi.powi(a as i32))
                    })
                    .sum::<f64>()
                    .abs()
            })
            .sum()
    }
}

/// Exact `eps sum_j |s_j(x)|`.
pub fn abs_sum_exact(s_list: &[Polynomial], eps: &Rational, x: &[Rational]) -> Rational {
    let total = s_list
        .iter()
        .fold(Rational::zero(), |acc, s| acc + s.eval_rational(x).abs());
    total * eps
}

pub fn abs_sum_lower_bound(
    s_list: &[Polynomial],
    domain: &BoxDomain,
    eps: &Rational,
    budget: usize,
    seed: u64,
) -> AbsSumResult {
    let n = domain.dim();
    let lo: Vec<f64> = domain.lo.iter().map(|q| to_f64(q, RoundMode::Up)).collect();
    let hi: Vec<f64> = domain
        .hi
        .iter()
        .map(|q| to_f64(q, RoundMode::Down))
        .collect();
    let compiled = Compiled::new(s_list);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = 0usize;
    let mut best_x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut best = compiled.eval(&best_x);
    evaluations += 1;
    let mut start = best_x.clone();
    let min_step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) * 1e-9).collect();

    while evaluations < budget {
        let mut x = start.clone();
        let mut fx = compiled.eval(&x);
        evaluations += 1;
        let mut step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.25 * (b - a)).collect();
        while evaluations < budget && step.iter().zip(&min_step).any(|(s, m)| s > m) {
            let mut improved = false;
            for i in 0..n {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] = (x[i] + dir * step[i]).clamp(lo[i], hi[i]);
                    if y[i] == x[i] {
                        continue;
                    }
                    let fy = compiled.eval(&y);
                    evaluations += 1;
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
        if fx > best {
            best = fx;
            best_x = x;
        }
        start = lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| if a < b { rng.random_range(a..=b) } else { a })
            .collect();
    }

    let xq: Vec<Rational> = best_x.iter().map(|&v| rational_from_f64(v)).collect();
    let exact = abs_sum_exact(s_list, eps, &xq);
    debug_assert!(!exact.is_negative());
    AbsSumResult {
        value: to_f64(&exact, RoundMode::Down),
        exact,
        argmax: best_x,
        evaluations,
    }
}
