//! Binary floating-point formats and exact rounding of rationals.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Single,
}

impl Precision {
    /// Significand bits including the hidden bit.
    pub fn bits(self) -> u32 {
        match self {
            Precision::Double => 53,
            Precision::Single => 24,
        }
    }

    /// Unit roundoff `2^-p` as an exact rational.
    pub fn epsilon(self) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << self.bits())
    }

    pub fn epsilon_f64(self) -> f64 {
        (-(self.bits() as f64)).exp2()
    }

    /// Rounds an `f64` to the nearest value of this format.
    pub fn round_f64(self, x: f64) -> f64 {
        match self {
            Precision::Double => x,
            Precision::Single => x as f32 as f64,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Single => "single",
        })
    }
}

impl FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "double" => Ok(Precision::Double),
            "single" => Ok(Precision::Single),
            other => Err(format!("unknown precision `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundMode {
    NearestEven,
    Down,
    Up,
}

/// Rounds `q` to a `bits`-bit significand with an unbounded exponent.
pub fn round_rational(q: &Rational, bits: u32, mode: RoundMode) -> Rational {
    if q.is_zero() {
        return Rational::zero();
    }
    let negative = q.is_negative();
    let num = q.numer().abs();
    let den = q.denom().abs();
    // 2^(e-1) <= num/den < 2^e
    let mut e = num.bits() as i64 - den.bits() as i64;
    if shifted_cmp(&num, &den, e) {
        e += 1;
    }
    let shift = bits as i64 - e;
    let (scaled_num, scaled_den) = if shift >= 0 {
        (num << shift as usize, den)
    } else {
        (num, den << (-shift) as usize)
    };
    let (mut m, rem) = scaled_num.div_rem(&scaled_den);
    if !rem.is_zero() {
        // The direction toward larger magnitude.
        let away = match mode {
            RoundMode::NearestEven => {
                let twice: BigInt = &rem << 1usize;
                match twice.cmp(&scaled_den) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => m.is_odd(),
                }
            }
            RoundMode::Down => negative,
            RoundMode::Up => !negative,
        };
        if away {
            m += 1;
        }
    }
    let m = if negative { -m } else { m };
    if shift >= 0 {
        Rational::new(m, BigInt::one() << shift as usize)
    } else {
        Rational::from_integer(m << (-shift) as usize)
    }
}

/// True when `num / den >= 2^e`.
fn shifted_cmp(num: &BigInt, den: &BigInt, e: i64) -> bool {
    if e >= 0 {
        *num >= (den << e as usize)
    } else {
        (num << (-e) as usize) >= *den
    }
}

pub fn round_to(q: &Rational, prec: Precision) -> Rational {
    round_rational(q, prec.bits(), RoundMode::NearestEven)
}

pub fn is_representable(q: &Rational, prec: Precision) -> bool {
    round_to(q, prec) == *q
}

/// Exact conversion of a finite `f64`.
pub fn rational_from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

/// Converts a rational to `f64`; the result lies on the requested side of `q`.
pub fn to_f64(q: &Rational, mode: RoundMode) -> f64 {
    let r = round_rational(q, 53, mode);
    let (n, d) = (r.numer(), r.denom());
    let n = n.to_f64().unwrap_or(f64::NAN);
    let d_bits = d.bits();
    if d_bits == 0 {
        return n;
    }
    // d is a power of two
    n * (-((d_bits - 1) as f64)).exp2()
}

pub fn to_f64_nearest(q: &Rational) -> f64 {
    to_f64(q, RoundMode::NearestEven)
}

/// The next `f64` toward negative infinity.
pub fn next_down(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return x;
    }
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else {
        f64::from_bits(bits + 1)
    }
}

pub fn next_up(x: f64) -> f64 {
    -next_down(-x)
}

/// Parses a decimal literal (`12`, `-0.5`, `1.5e-3`) exactly.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i64>().ok()?),
        None => (text, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n = BigInt::parse_bytes(digits.as_bytes(), 10)?;
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let mut q = if scale >= 0 {
        Rational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(n, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        q = -q;
    }
    Some(q)
}

/// Writes a rational as `n` or `n/d`.
pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn sign_of(q: &Rational) -> Sign {
    q.numer().sign()
}
