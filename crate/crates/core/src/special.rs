//! Exponential integrals used by the closed-form vacuum part of the bath
//! correlation function.
//!
//! Both functions are returned in exponentially scaled form so that
//! `e^{-x} Ei(x)` and `e^{x} E1(x)` stay finite for large arguments.

#[allow(unused_imports)]
use crate::prelude::*;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `e^{x} E1(x)` for `x > 0`, with `E1(x) = int_x^inf e^{-u}/u du`.
pub fn scaled_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        // E1 = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // Modified Lentz evaluation of the continued fraction
        // e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...))).
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }
}

/// `e^{-x} Ei(x)` for `x > 0`, with `Ei(x) = PV int_{-inf}^x e^{u}/u du`.
pub fn scaled_ei(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= -EPS.ln() {
        // Ei = gamma + ln x + sum_{k>=1} x^k / (k k!), all terms positive.
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..500 {
            term *= x / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib < EPS * sum {
                break;
            }
        }
        (EULER_GAMMA + x.ln() + sum) * (-x).exp()
    } else {
        // Asymptotic series e^{-x} Ei(x) ~ (1/x) sum_k k!/x^k, truncated at
        // its smallest term.
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..100 {
            let prev = term;
            term *= k as f64 / x;
            if term < EPS * sum {
                break;
            }
            if term >= prev {
                sum -= prev;
                break;
            }
            sum += term;
        }
        sum / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values of E1 and Ei from standard tables.
    #[test]
    fn e1_table_values() {
        let cases = [
            (0.1, 1.822_923_958_419_390_7),
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_27),
            (2.0, 0.048_900_510_708_061_12),
            (5.0, 0.001_148_295_591_275_325_7),
            (10.0, 4.156_968_929_685_324e-6),
        ];
        for (x, e1) in cases {
            assert_relative_eq!(scaled_e1(x) * (-x).exp(), e1, max_relative = 1e-13);
        }
    }

    #[test]
    fn ei_table_values() {
        let cases = [
            (0.1, -1.622_812_813_969_276_2),
            (0.5, 0.454_219_904_863_173_6),
            (1.0, 1.895_117_816_355_936_8),
            (2.0, 4.954_234_356_001_89),
            (5.0, 40.185_275_355_803_18),
            (10.0, 2_492.228_976_241_877_8),
            (50.0, 1.058_563_689_713_169e20),
        ];
        for (x, ei) in cases {
            assert_relative_eq!(scaled_ei(x) * x.exp(), ei, max_relative = 1e-12);
        }
    }

    #[test]
    fn large_argument_asymptotics() {
        for x in [100.0, 1e3, 1e5] {
            assert_relative_eq!(scaled_e1(x) * x, 1.0, max_relative = 1.5 / x);
            assert_relative_eq!(scaled_ei(x) * x, 1.0, max_relative = 1.5 / x);
        }
    }

    #[test]
    fn branches_join_continuously() {
        let lo = 1.0 - 1e-12;
        assert_relative_eq!(scaled_e1(lo), scaled_e1(1.0 + 1e-12), max_relative = 1e-11);
        // The step itself moves the value by about 2e-9 / x relative.
        let cut = -EPS.ln();
        assert_relative_eq!(scaled_ei(cut - 1e-9), scaled_ei(cut + 1e-9), max_relative = 1e-10);
    }
}
