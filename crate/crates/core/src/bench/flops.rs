//! Leading-order flop counts of the three hierarchies.

use crate::moments::binomial;
use crate::pipeline::Method;

/// `geneig`: `C(n+m+k, k)^3`; `mvbeta`: `m C(2(n+m)+2k-1, 2k)`; `robsdp`: `m^3 C(n+k, k)^3`.
///
/// The factors `m` use `max(m, 1)`. Returns `None` for the non-hierarchy methods.
pub fn flop_estimate(method: Method, n: u64, m: u64, k: u64) -> Option<u128> {
    let mm = m.max(1) as u128;
    match method {
        Method::Geneig => Some(binomial(n + m + k, k).pow(3)),
        Method::Mvbeta => {
            let top = (2 * (n + m) + 2 * k).saturating_sub(1);
            Some(mm * binomial(top, 2 * k))
        }
        Method::Robsdp => Some(mm.pow(3) * binomial(n + k, k).pow(3)),
        Method::Sample | Method::AbsSum => None,
    }
}

/// Whether `estimate` rounds to `printed` at two significant digits, i.e. lies
/// within half a unit of the second significant digit of `printed`.
pub fn matches_two_digits(estimate: u128, printed: f64) -> bool {
    if printed <= 0.0 {
        return estimate == 0;
    }
    let unit = 10f64.powi(printed.log10().floor() as i32 - 1);
    (estimate as f64 - printed).abs() <= 0.5 * unit * (1.0 + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_values() {
        // 203490 = C(21, 8)
        assert_eq!(
            flop_estimate(Method::Geneig, 3, 10, 8),
            Some(203_490u128.pow(3))
        );
        // C(11, 8) = 165
        assert_eq!(
            flop_estimate(Method::Robsdp, 3, 10, 8),
            Some(1000 * 165u128.pow(3))
        );
        assert!(matches_two_digits(4_492_125_000, 4.50e9));
        for method in [Method::Geneig, Method::Mvbeta, Method::Robsdp] {
            assert_eq!(flop_estimate(method, 0, 0, 0), Some(1));
        }
        assert_eq!(flop_estimate(Method::Sample, 1, 1, 1), None);
    }

    #[test]
    fn two_digit_matching() {
        assert!(matches_two_digits(2744, 2.75e3));
        assert!(!matches_two_digits(2690, 2.75e3));
        assert!(matches_two_digits(1249, 1.2e3));
    }
}
