//! Exact arithmetic for the basic math functions.
//!
//! Operands are parsed from their decimal text into rationals, so `0.1 + 0.2`
//! is exactly `0.3`. Results are rendered as plain decimals (no exponent),
//! capped at twelve significant digits with half-away-from-zero rounding.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub const SIGNIFICANT_DIGITS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MathOp {
    Add,
    Subtract,
    Multiply,
    Divide,
}

impl MathOp {
    pub fn name(self) -> &'static str {
        match self {
            MathOp::Add => "add",
            MathOp::Subtract => "subtract",
            MathOp::Multiply => "multiply",
            MathOp::Divide => "divide",
        }
    }

    /// `None` only for division by zero.
    pub fn apply(self, a: &BigRational, b: &BigRational) -> Option<BigRational> {
        match self {
            MathOp::Add => Some(a + b),
            MathOp::Subtract => Some(a - b),
            MathOp::Multiply => Some(a * b),
            MathOp::Divide => (!b.is_zero()).then(|| a / b),
        }
    }
}

/// Parse decimal text such as `-12.5`, `3`, `.25` or `1e20` exactly.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let s = text.trim();
    let (negative, s) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exponent - frac_part.len() as i32;
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= BigRational::from_integer(pow10(scale as u32));
    } else {
        value /= BigRational::from_integer(pow10(scale.unsigned_abs()));
    }
    Some(if negative { -value } else { value })
}

fn pow10(n: u32) -> BigInt {
    num_traits::pow(BigInt::from(10), n as usize)
}

/// Minimal plain-decimal text, rounded to [`SIGNIFICANT_DIGITS`].
pub fn render_decimal(value: &BigRational) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let negative = value.is_negative();
    let magnitude = value.abs();

    // exponent such that 10^e <= magnitude < 10^(e+1)
    let mut e = magnitude.numer().to_str_radix(10).len() as i64 - magnitude.denom().to_str_radix(10).len() as i64;
    loop {
        if magnitude < scaled_one(e) {
            e -= 1;
        } else if magnitude >= scaled_one(e + 1) {
            e += 1;
        } else {
            break;
        }
    }

    let shift = SIGNIFICANT_DIGITS as i64 - 1 - e;
    let scaled = &magnitude * scaled_one(shift);
    let (q, r) = scaled.numer().div_rem(scaled.denom());
    let mut q = q;
    // half away from zero on the magnitude
    if &r * BigInt::from(2) >= *scaled.denom() {
        q += BigInt::one();
    }
    let mut shift = shift;
    if q == pow10(SIGNIFICANT_DIGITS) {
        q /= BigInt::from(10);
        shift -= 1;
    }

    let digits = q.to_str_radix(10);
    let mut out = if shift <= 0 {
        let mut s = digits;
        s.extend(std::iter::repeat_n('0', (-shift) as usize));
        s
    } else {
        let shift = shift as usize;
        let padded = if digits.len() <= shift {
            format!("{}{}", "0".repeat(shift - digits.len() + 1), digits)
        } else {
            digits
        };
        let (int_part, frac_part) = padded.split_at(padded.len() - shift);
        let frac_part = frac_part.trim_end_matches('0');
        if frac_part.is_empty() {
            int_part.to_string()
        } else {
            format!("{int_part}.{frac_part}")
        }
    };
    if negative && out != "0" {
        out.insert(0, '-');
    }
    out
}

fn scaled_one(exp: i64) -> BigRational {
    let p = pow10(exp.unsigned_abs() as u32);
    if exp >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}
