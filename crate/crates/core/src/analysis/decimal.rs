//! Exact-to-decimal rendering of rationals.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Significant digits used for every decimal the tools print.
pub const SIGNIFICANT_DIGITS: usize = 12;

fn pow10(e: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), e as usize)
}

/// Renders `value` in positional notation with exactly `digits` significant
/// digits, rounding half away from zero.
pub fn format_significant(value: &BigRational, digits: usize) -> String {
    assert!(digits > 0);
    if value.is_zero() {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let negative = value.is_negative();
    let abs = value.abs();

    // decimal exponent e with 10^e <= |value| < 10^(e+1)
    let mut e: i64 = abs.numer().to_string().len() as i64 - abs.denom().to_string().len() as i64;
    let scaled_at = |e: i64| -> BigRational {
        if e >= 0 {
            abs.clone() / BigRational::from_integer(pow10(e as u32))
        } else {
            abs.clone() * BigRational::from_integer(pow10((-e) as u32))
        }
    };
    while scaled_at(e) >= BigRational::from_integer(BigInt::from(10)) {
        e += 1;
    }
    while scaled_at(e) < BigRational::one() {
        e -= 1;
    }

    let shift = digits as i64 - 1 - e;
    let shifted = if shift >= 0 {
        abs * BigRational::from_integer(pow10(shift as u32))
    } else {
        abs / BigRational::from_integer(pow10((-shift) as u32))
    };
    let (q, r) = shifted.numer().div_rem(shifted.denom());
    let mut mantissa = if BigInt::from(2) * r >= *shifted.denom() {
        q + 1
    } else {
        q
    };
    if mantissa == pow10(digits as u32) {
        mantissa /= 10;
        e += 1;
    }
    let text = mantissa.to_str_radix(10);
    debug_assert_eq!(text.len(), digits);

    let body = if e >= digits as i64 - 1 {
        let mut s = text;
        s.extend(std::iter::repeat_n('0', (e - (digits as i64 - 1)) as usize));
        s
    } else if e >= 0 {
        let split = (e + 1) as usize;
        format!("{}.{}", &text[..split], &text[split..])
    } else {
        format!("0.{}{}", "0".repeat((-e - 1) as usize), text)
    };
    if negative && mantissa_sign_nonzero(&body) {
        format!("-{body}")
    } else {
        body
    }
}

fn mantissa_sign_nonzero(body: &str) -> bool {
    body.chars().any(|c| c.is_ascii_digit() && c != '0')
}

/// Twelve significant digits.
pub fn format_decimal(value: &BigRational) -> String {
    format_significant(value, SIGNIFICANT_DIGITS)
}

/// `p/q`, or just `p` for integers.
pub fn format_exact(value: &BigRational) -> String {
    value.to_string()
}

pub fn to_f64(value: &BigRational) -> f64 {
    format_significant(value, 17).parse().unwrap_or_else(|_| {
        if value.numer().sign() == Sign::Minus {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn twelve_digit_rendering() {
        assert_eq!(format_decimal(&r(9, 4)), "2.25000000000");
        assert_eq!(format_decimal(&r(5, 2)), "2.50000000000");
        assert_eq!(format_decimal(&r(1, 1)), "1.00000000000");
        assert_eq!(format_decimal(&r(49, 1)), "49.0000000000");
        assert_eq!(format_decimal(&r(19, 6)), "3.16666666667");
        assert_eq!(format_decimal(&r(2, 3)), "0.666666666667");
        assert_eq!(format_decimal(&r(1, 800)), "0.00125000000000");
        assert_eq!(format_decimal(&r(-49, 25)), "-1.96000000000");
        assert_eq!(format_decimal(&r(0, 1)), "0.00000000000");
        assert_eq!(format_decimal(&r(3721, 1)), "3721.00000000");
        assert_eq!(format_decimal(&r(123456789012345, 1)), "123456789012000");
    }

    #[test]
    fn rounding_carries_into_next_decade() {
        assert_eq!(format_significant(&r(9999, 1000), 3), "10.0");
        assert_eq!(format_significant(&r(995, 1000), 2), "1.0");
        assert_eq!(format_significant(&r(1, 8), 2), "0.13");
    }

    #[test]
    fn exact_rendering() {
        assert_eq!(format_exact(&r(9, 4)), "9/4");
        assert_eq!(format_exact(&r(8, 4)), "2");
    }

    #[test]
    fn float_conversion() {
        assert_eq!(to_f64(&r(9, 4)), 2.25);
        assert!((to_f64(&r(19, 6)) - 19.0 / 6.0).abs() < 1e-15);
    }
}
