//! Exact rational helpers shared by every module.
//!
//! All masses are carried as [`Rational`] (arbitrary precision, always
//! reduced, positive denominator). Only the exponential functional and the
//! min-norm solver touch binary floating point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// `n / d` as a reduced rational. Panics when `d == 0`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn pow_int(base: u32, exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(base), exp as usize)
}

/// Nearest double (round-to-nearest via num-rational's exact conversion).
pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// `p/q` or plain integer form; denominators of 1 are dropped.
pub fn format(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p/q`, an integer, or a finite decimal (`0.25`, `-1.5e-3`) exactly.
pub fn parse(s: &str) -> std::result::Result<Rational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> std::result::Result<Rational, String> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..].parse().map_err(|_| format!("bad exponent in {s:?}"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(format!("not a number: {s:?}"));
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("not a number: {s:?}"));
    }
    let all: BigInt = format!("0{whole}{frac}")
        .parse()
        .map_err(|_| format!("not a number: {s:?}"))?;
    let scale = exponent - frac.len() as i64;
    if scale.unsigned_abs() > 10_000 {
        return Err(format!("exponent out of range in {s:?}"));
    }
    let mut q = Rational::from_integer(all);
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        q *= num_traits::pow(ten, scale as usize);
    } else {
        q /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if neg { -q } else { q })
}

/// Exact conversion of a finite double.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidConfig(format!("non-finite value {x}")))
}

pub fn floor_int(q: &Rational) -> BigInt {
    q.numer().div_floor(q.denom())
}

pub fn ceil_int(q: &Rational) -> BigInt {
    -((-q.numer()).div_floor(q.denom()))
}

/// Whether the reduced denominator is a power of `base`.
pub fn denominator_is_power_of(q: &Rational, base: u32) -> bool {
    let b = BigInt::from(base);
    let mut d = q.denom().clone();
    while !d.is_one() {
        let (quot, rem) = d.div_rem(&b);
        if !rem.is_zero() {
            return false;
        }
        d = quot;
    }
    true
}

/// Number of points `k / base^level` strictly inside `(lo, hi)`.
pub fn grid_points_inside(lo: &Rational, hi: &Rational, base: u32, level: u32) -> BigInt {
    let scale = Rational::from_integer(pow_int(base, level));
    let first: BigInt = floor_int(&(lo * &scale)) + 1u32;
    let last: BigInt = ceil_int(&(hi * &scale)) - 1u32;
    if last < first {
        BigInt::zero()
    } else {
        last - first + 1
    }
}

/// The points `k / base^level` strictly inside `(lo, hi)`, ascending.
pub fn grid_points(lo: &Rational, hi: &Rational, base: u32, level: u32) -> Vec<Rational> {
    let denom = pow_int(base, level);
    let scale = Rational::from_integer(denom.clone());
    let first: BigInt = floor_int(&(lo * &scale)) + 1u32;
    let last: BigInt = ceil_int(&(hi * &scale)) - 1u32;
    let mut out = Vec::new();
    let mut k = first;
    while k <= last {
        out.push(Rational::new(k.clone(), denom.clone()));
        k += 1;
    }
    out
}

/// Smallest level with at least one grid point strictly inside `(lo, hi)`.
pub fn first_level_inside(lo: &Rational, hi: &Rational, base: u32) -> u32 {
    assert!(lo < hi, "empty interval");
    let b = BigInt::from(base);
    let (ln, ld) = (lo.numer(), lo.denom());
    let (hn, hd) = (hi.numer(), hi.denom());
    let mut lo_scaled = ln.clone();
    let mut hi_scaled = hn.clone();
    let mut level = 0u32;
    loop {
        // points k with lo * b^level < k < hi * b^level
        let first: BigInt = lo_scaled.div_floor(ld) + 1u32;
        let last: BigInt = -((-&hi_scaled).div_floor(hd)) - 1u32;
        if first <= last {
            return level;
        }
        lo_scaled *= &b;
        hi_scaled *= &b;
        level += 1;
    }
}
