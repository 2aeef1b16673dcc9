//! Exact interpretation of configuration numbers.
//!
//! Config and trace values arrive as `f64`, but they are written by people as
//! decimals (`0.9`, `900`, `2.5`). A binary `0.9` is slightly larger than nine
//! tenths, which is enough to push `ceil(0.9 * 886000 / 600)` from 1329 to
//! 1330. Every value is therefore read back as the shortest decimal that
//! round-trips to the same `f64`, and arithmetic proceeds on that rational.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive};

/// Exact cost amount. All costs in the system are decimal config values times
/// integer instance counts, so a rational with `i128` parts never loses
/// precision at the scales this crate targets.
pub type Cost = Ratio<i128>;

/// Splits the shortest round-trip decimal form of `x` into
/// `(negative, digits, fractional_len)`.
fn decimal_digits(x: f64) -> Option<(bool, String, u32)> {
    if !x.is_finite() {
        return None;
    }
    // `Display` for f64 never uses exponent notation and is shortest round-trip.
    let s = format!("{}", x);
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((a, b)) => (a, b),
        None => (body, ""),
    };
    let mut digits = String::with_capacity(int_part.len() + frac_part.len());
    digits.push_str(int_part);
    digits.push_str(frac_part);
    Some((neg, digits, frac_part.len() as u32))
}

/// The decimal value of `x` as an arbitrary-precision rational.
pub fn big_rational(x: f64) -> Option<BigRational> {
    let (neg, digits, frac) = decimal_digits(x)?;
    let mut numer: BigInt = digits.parse().ok()?;
    if neg {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10u8), frac as usize);
    Some(BigRational::new(numer, denom))
}

/// The decimal value of `x` as a [`Cost`], or `None` if it does not fit.
pub fn cost(x: f64) -> Option<Cost> {
    let (neg, digits, frac) = decimal_digits(x)?;
    let digits = digits.trim_start_matches('0');
    let numer: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let denom = 10i128.checked_pow(frac)?;
    let r = Ratio::new(numer, denom);
    Some(if neg { -r } else { r })
}

pub fn cost_to_f64(c: &Cost) -> f64 {
    c.numer().to_f64().unwrap_or(f64::NAN) / c.denom().to_f64().unwrap_or(f64::NAN)
}

/// Smallest integer `>= r`, for nonnegative `r`.
pub fn ceil_u64(r: &BigRational) -> Option<u64> {
    if r.is_negative() {
        return None;
    }
    r.ceil().to_integer().to_u64()
}

/// Integer ratio `floor(a / b)` for positive costs.
pub fn floor_ratio(a: &Cost, b: &Cost) -> i128 {
    (a / b).floor().to_integer()
}

/// Converts a set of decimal values sharing one unit (e.g. CPU cores) to
/// integers by multiplying through by the smallest power of ten that clears
/// every fractional part.
pub fn common_integer_scale(values: &[f64]) -> Option<Vec<u64>> {
    let rationals: Vec<BigRational> = values.iter().map(|&v| big_rational(v)).collect::<Option<_>>()?;
    let mut scale = BigInt::one();
    for r in &rationals {
        scale = scale.lcm(r.denom());
    }
    rationals
        .iter()
        .map(|r| {
            let scaled = r * BigRational::from_integer(scale.clone());
            debug_assert!(scaled.is_integer());
            if scaled.is_negative() {
                None
            } else {
                scaled.to_integer().to_u64()
            }
        })
        .collect()
}
