//! Exact interval arithmetic over rational boxes.

use num_traits::{One, Signed, Zero};

use rustc_hash::FxHashMap;

use crate::float::Rational;
use crate::poly::Polynomial;

/// Axis-aligned box `[lo_i, hi_i]`; invariant `lo_i <= hi_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDomain {
    pub lo: Vec<Rational>,
    pub hi: Vec<Rational>,
}

impl BoxDomain {
    pub fn new(lo: Vec<Rational>, hi: Vec<Rational>) -> Self {
        assert_eq!(lo.len(), hi.len(), "bound vectors differ in length");
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b), "empty box");
        BoxDomain { lo, hi }
    }

    pub fn unit(n: usize) -> Self {
        BoxDomain::new(vec![Rational::zero(); n], vec![Rational::one(); n])
    }

    /// The cube `[-r, r]^n`.
    pub fn symmetric(n: usize, r: &Rational) -> Self {
        BoxDomain::new(vec![-r.clone(); n], vec![r.clone(); n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> Rational {
        &self.hi[i] - &self.lo[i]
    }

    pub fn volume(&self) -> Rational {
        (0..self.dim()).fold(Rational::one(), |acc, i| acc * self.width(i))
    }

    /// Cartesian product `self x other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend(other.lo.iter().cloned());
        let mut hi = self.hi.clone();
        hi.extend(other.hi.iter().cloned());
        BoxDomain { lo, hi }
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(i, v)| &self.lo[i] <= v && v <= &self.hi[i])
    }

    pub fn interval(&self, i: usize) -> Interval {
        Interval::new(self.lo[i].clone(), self.hi[i].clone())
    }

    /// Rewrites `p` in coordinates `y in [0,1]^n` with `x = lo + (hi - lo) y`.
    pub fn to_unit(&self, p: &Polynomial) -> Polynomial {
        let scale: Vec<Rational> = (0..self.dim()).map(|i| self.width(i)).collect();
        p.compose_affine(&self.lo, &scale)
    }
}

/// Closed rational interval with `lo <= hi`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(v: Rational) -> Self {
        Interval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn magnitude(&self) -> Rational {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub fn scale(&self, c: &Rational) -> Interval {
        let a = &self.lo * c;
        let b = &self.hi * c;
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    /// Exact range of `x^n` over the interval.
    pub fn powi(&self, n: u32) -> Interval {
        if n == 0 {
            return Interval::point(Rational::one());
        }
        let a = num_traits::pow(self.lo.clone(), n as usize);
        let b = num_traits::pow(self.hi.clone(), n as usize);
        if n % 2 == 1 || !self.lo.is_negative() {
            Interval { lo: a, hi: b }
        } else if !self.hi.is_positive() {
            Interval { lo: b, hi: a }
        } else {
            Interval {
                lo: Rational::zero(),
                hi: a.max(b),
            }
        }
    }
}

/// Encloses `p` over `domain` by summing exact monomial ranges.
pub fn interval_eval(p: &Polynomial, domain: &BoxDomain) -> Interval {
    assert_eq!(p.nvars(), domain.dim(), "dimension mismatch");
    let mut powers = PowerCache::new(domain);
    let mut acc = Interval::zero();
    for (m, c) in p.terms() {
        acc = acc.add(&powers.monomial(m).scale(c));
    }
    acc
}

/// Upper bound on `max |p|` over `domain`.
pub fn ia_bound(p: &Polynomial, domain: &BoxDomain) -> Rational {
    interval_eval(p, domain).magnitude()
}

/// Memoized ranges of `x_i^a` over a box.
struct PowerCache {
    vars: Vec<Interval>,
    table: FxHashMap<(usize, u16), Interval>,
}

impl PowerCache {
    fn new(domain: &BoxDomain) -> Self {
        PowerCache {
            vars: (0..domain.dim()).map(|i| domain.interval(i)).collect(),
            table: FxHashMap::default(),
        }
    }

    fn power(&mut self, i: usize, a: u16) -> Interval {
        let vars = &self.vars;
        self.table
            .entry((i, a))
            .or_insert_with(|| vars[i].powi(a as u32))
            .clone()
    }

    /// Exact range of the monomial `x^m` over the box (coordinates of `m` past the box are ignored).
    fn monomial(&mut self, m: &[u16]) -> Interval {
        let mut t = Interval::point(Rational::one());
        for (i, &a) in m.iter().enumerate().take(self.vars.len()) {
            if a > 0 {
                t = t.mul(&self.power(i, a));
            }
        }
        t
    }
}

/// `interval_eval` over `domain x [-r, r]^m`, where the first `domain.dim()`
/// variables of `p` range over `domain` and the remaining `m` over `[-r, r]`.
///
/// Terms sharing their `x`-part, total degree in the trailing variables, parity
/// class and coefficient sign have ranges that add linearly in the coefficient,
/// so they are merged before any interval product; the result equals
/// `interval_eval` on the product box.
pub fn interval_eval_symmetric_tail(p: &Polynomial, domain: &BoxDomain, r: &Rational) -> Interval {
    let n = domain.dim();
    assert!(p.nvars() >= n, "dimension mismatch");
    assert!(!r.is_negative(), "radius must be nonnegative");
    // (x-part, tail degree, all tail exponents even) -> (sum of positive, sum of negative)
    let mut groups: FxHashMap<(&[u16], u32, bool), (Rational, Rational)> = FxHashMap::default();
    for (m, c) in p.terms() {
        let tail = &m[n..];
        let d: u32 = tail.iter().map(|&a| a as u32).sum();
        let even = tail.iter().all(|a| a % 2 == 0);
        let entry = groups
            .entry((&m[..n], d, even))
            .or_insert_with(|| (Rational::zero(), Rational::zero()));
        if !even {
            entry.0 += c.abs();
        } else if c.is_positive() {
            entry.0 += c;
        } else {
            entry.1 += c;
        }
    }
    let mut powers = PowerCache::new(domain);
    let mut acc = Interval::zero();
    for ((xpart, d, even), (pos, neg)) in groups {
        let x = powers.monomial(xpart);
        let t = num_traits::pow(r.clone(), d as usize);
        let range = if d == 0 {
            x
        } else if !even {
            let w = x.magnitude() * &t;
            Interval::new(-w.clone(), w)
        } else {
            let lo = (&x.lo * &t).min(Rational::zero());
            let hi = (&x.hi * &t).max(Rational::zero());
            Interval::new(lo, hi)
        };
        if !pos.is_zero() {
            acc = acc.add(&range.scale(&pos));
        }
        if !neg.is_zero() {
            acc = acc.add(&range.scale(&neg));
        }
    }
    acc
}
