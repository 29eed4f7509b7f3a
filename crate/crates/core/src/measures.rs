//! Finite positive Borel measures on `[0, 1)` with exact mass evaluation.
//!
//! A measure is a tree of atoms, piecewise-polynomial densities, scaled
//! middle-thirds Cantor measures, sums and nonnegative rescalings. Every
//! mass is computed through the cumulative function `x ↦ m([0, x))`, so
//! `m([a, b)) = F(b) - F(a)` and finite additivity holds exactly.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::polynomial::Polynomial;
use crate::rational::{self, Rational};

/// Default bound on the error of inexact Cantor masses: `10^-15`.
pub fn default_cantor_tolerance() -> Rational {
    Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), 15))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atoms {
    locations: Vec<Rational>,
    weights: Vec<Rational>,
    /// `prefix[i]` = total weight of the first `i` atoms (sorted by location).
    prefix: Vec<Rational>,
}

impl Atoms {
    pub fn new(pairs: Vec<(Rational, Rational)>, path: &str) -> Result<Self> {
        for (i, (loc, w)) in pairs.iter().enumerate() {
            if loc.is_negative() || loc >= &Rational::one() {
                return Err(invalid(format!("{path}[{i}][0]"), "atom location outside [0,1)"));
            }
            if w.is_negative() {
                return Err(invalid(format!("{path}[{i}][1]"), "negative atom weight"));
            }
        }
        let mut sorted = pairs;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(invalid(
                path.to_string(),
                format!("duplicate atom location {}", rational::format(&w[0].0)),
            ));
        }
        let (locations, weights): (Vec<_>, Vec<_>) = sorted.into_iter().unzip();
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        prefix.push(Rational::zero());
        for w in &weights {
            let next = prefix.last().unwrap() + w;
            prefix.push(next);
        }
        Ok(Self {
            locations,
            weights,
            prefix,
        })
    }

    pub fn locations(&self) -> &[Rational] {
        &self.locations
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    fn cdf(&self, x: &Rational) -> Rational {
        let n = self.locations.partition_point(|l| l < x);
        self.prefix[n].clone()
    }

    fn cdf_f64(&self, x: &Rational) -> f64 {
        let n = self.locations.partition_point(|l| l < x);
        rational::to_f64(&self.prefix[n])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Density {
    breakpoints: Vec<Rational>,
    pieces: Vec<Polynomial>,
    /// `prefix[i]` = mass of `[0, breakpoints[i])`.
    prefix: Vec<Rational>,
}

impl Density {
    /// `breakpoints` must run `0 = b_0 < b_1 < … < b_k = 1`, with one
    /// coefficient list (ascending powers of `x`) per piece `[b_i, b_{i+1})`.
    pub fn new(breakpoints: Vec<Rational>, coeffs: Vec<Vec<Rational>>, path: &str) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(invalid(format!("{path}.breakpoints"), "need at least [0, 1]"));
        }
        if !breakpoints[0].is_zero() || !breakpoints.last().unwrap().is_one() {
            return Err(invalid(format!("{path}.breakpoints"), "must start at 0 and end at 1"));
        }
        if let Some(i) = breakpoints.windows(2).position(|w| w[0] >= w[1]) {
            return Err(invalid(
                format!("{path}.breakpoints[{}]", i + 1),
                "breakpoints must increase strictly",
            ));
        }
        if coeffs.len() != breakpoints.len() - 1 {
            return Err(invalid(
                format!("{path}.coeffs"),
                format!("expected {} pieces, got {}", breakpoints.len() - 1, coeffs.len()),
            ));
        }
        let pieces: Vec<Polynomial> = coeffs.into_iter().map(Polynomial::new).collect();
        for (i, p) in pieces.iter().enumerate() {
            if !p.is_nonnegative_on(&breakpoints[i], &breakpoints[i + 1]) {
                return Err(invalid(
                    format!("{path}.coeffs[{i}]"),
                    "polynomial is negative on its piece",
                ));
            }
        }
        let mut prefix = Vec::with_capacity(breakpoints.len());
        prefix.push(Rational::zero());
        for (i, p) in pieces.iter().enumerate() {
            let next = prefix.last().unwrap() + p.integral(&breakpoints[i], &breakpoints[i + 1]);
            prefix.push(next);
        }
        Ok(Self {
            breakpoints,
            pieces,
            prefix,
        })
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    fn cdf(&self, x: &Rational) -> Rational {
        if x <= &self.breakpoints[0] {
            return Rational::zero();
        }
        if x >= self.breakpoints.last().unwrap() {
            return self.prefix.last().unwrap().clone();
        }
        // piece i with b_i <= x < b_{i+1}
        let i = self.breakpoints.partition_point(|b| b <= x) - 1;
        &self.prefix[i] + self.pieces[i].integral(&self.breakpoints[i], x)
    }

    fn cdf_f64(&self, x: &Rational, xf: f64) -> f64 {
        if x <= &self.breakpoints[0] {
            return 0.0;
        }
        if x >= self.breakpoints.last().unwrap() {
            return rational::to_f64(self.prefix.last().unwrap());
        }
        let i = self.breakpoints.partition_point(|b| b <= x) - 1;
        let b = rational::to_f64(&self.breakpoints[i]);
        // ∫_b^x t^k dt = (x - b) Σ_{j≤k} x^j b^{k-j} / (k+1), free of cancellation
        let width = xf - b;
        let mut total = 0.0;
        let mut power_sum = 0.0;
        let mut x_pow = 1.0;
        for (k, c) in self.pieces[i].coeffs().iter().enumerate() {
            power_sum = power_sum * b + x_pow;
            x_pow *= xf;
            total += rational::to_f64(c) * power_sum / (k as f64 + 1.0);
        }
        rational::to_f64(&self.prefix[i]) + width * total
    }
}

/// A finite positive measure on `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureSpec {
    Atoms(Atoms),
    Density(Density),
    /// Middle-thirds Cantor measure scaled to the given total weight.
    Cantor(Rational),
    Sum(Vec<MeasureSpec>),
    Scale(Rational, Box<MeasureSpec>),
}

/// A mass with its accuracy: exact, or within `error_bound`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassResult {
    pub value: Rational,
    pub exact: bool,
    pub error_bound: Rational,
}

#[derive(Clone, Debug)]
pub struct MassOptions {
    /// Fail with `NonTriadicEndpoint` instead of approximating Cantor masses.
    pub exact_only: bool,
    pub cantor_tolerance: Rational,
}

impl Default for MassOptions {
    fn default() -> Self {
        Self {
            exact_only: false,
            cantor_tolerance: default_cantor_tolerance(),
        }
    }
}

impl MassOptions {
    pub fn exact() -> Self {
        Self {
            exact_only: true,
            ..Self::default()
        }
    }
}

/// Cumulative value with the absolute error it carries.
#[derive(Clone, Debug)]
pub(crate) struct Cumulative {
    pub value: Rational,
    pub error: Rational,
}

impl MeasureSpec {
    pub fn atoms(pairs: Vec<(Rational, Rational)>) -> Result<Self> {
        Atoms::new(pairs, "$.atoms").map(Self::Atoms)
    }

    pub fn density(breakpoints: Vec<Rational>, coeffs: Vec<Vec<Rational>>) -> Result<Self> {
        Density::new(breakpoints, coeffs, "$.density").map(Self::Density)
    }

    pub fn cantor(weight: Rational) -> Result<Self> {
        if weight.is_negative() {
            return Err(invalid("$.cantor".into(), "negative Cantor weight"));
        }
        Ok(Self::Cantor(weight))
    }

    pub fn sum(parts: Vec<MeasureSpec>) -> Self {
        Self::Sum(parts)
    }

    pub fn scale(factor: Rational, inner: MeasureSpec) -> Result<Self> {
        if factor.is_negative() {
            return Err(invalid("$.scale[0]".into(), "negative scale factor"));
        }
        Ok(Self::Scale(factor, Box::new(inner)))
    }

    /// Lebesgue measure on `[0, 1)`.
    pub fn lebesgue() -> Self {
        Self::piecewise_constant(vec![Rational::zero(), Rational::one()], vec![Rational::one()]).expect("valid")
    }

    /// Step density: `values[i]` on `[breakpoints[i], breakpoints[i+1])`.
    pub fn piecewise_constant(breakpoints: Vec<Rational>, values: Vec<Rational>) -> Result<Self> {
        Self::density(breakpoints, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn dirac(at: Rational) -> Result<Self> {
        Self::atoms(vec![(at, Rational::one())])
    }

    pub fn zero() -> Self {
        Self::Sum(Vec::new())
    }

    pub fn has_cantor(&self) -> bool {
        match self {
            Self::Cantor(w) => !w.is_zero(),
            Self::Sum(parts) => parts.iter().any(Self::has_cantor),
            Self::Scale(f, inner) => !f.is_zero() && inner.has_cantor(),
            _ => false,
        }
    }

    /// Total weight carried by Cantor components.
    fn cantor_weight(&self) -> Rational {
        match self {
            Self::Cantor(w) => w.clone(),
            Self::Sum(parts) => parts.iter().map(Self::cantor_weight).sum(),
            Self::Scale(f, inner) => f * inner.cantor_weight(),
            _ => Rational::zero(),
        }
    }

    /// Atom locations and interior density breakpoints, sorted, deduplicated.
    pub fn structural_points(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        self.collect_structural(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_structural(&self, out: &mut Vec<Rational>) {
        match self {
            Self::Atoms(a) => out.extend(
                a.locations
                    .iter()
                    .zip(&a.weights)
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(l, _)| l.clone()),
            ),
            Self::Density(d) => {
                let n = d.breakpoints.len();
                out.extend(d.breakpoints[1..n - 1].iter().cloned())
            }
            Self::Cantor(_) => {}
            Self::Sum(parts) => parts.iter().for_each(|p| p.collect_structural(out)),
            Self::Scale(f, inner) => {
                if !f.is_zero() {
                    inner.collect_structural(out)
                }
            }
        }
    }

    /// `m([0, x))` with Cantor descent cut off at `depth` ternary digits.
    pub(crate) fn cumulative(&self, x: &Rational, depth: u32) -> Cumulative {
        match self {
            Self::Atoms(a) => exact_cumulative(a.cdf(x)),
            Self::Density(d) => exact_cumulative(d.cdf(x)),
            Self::Cantor(w) => {
                if w.is_zero() {
                    return exact_cumulative(Rational::zero());
                }
                let (value, exact) = cantor_function(x, depth);
                let error = if exact {
                    Rational::zero()
                } else {
                    w / Rational::from_integer(rational::pow_int(2, depth))
                };
                Cumulative {
                    value: w * value,
                    error,
                }
            }
            Self::Sum(parts) => {
                let mut value = Rational::zero();
                let mut error = Rational::zero();
                for p in parts {
                    let c = p.cumulative(x, depth);
                    value += c.value;
                    error += c.error;
                }
                Cumulative { value, error }
            }
            Self::Scale(f, inner) => {
                if f.is_zero() {
                    return exact_cumulative(Rational::zero());
                }
                let c = inner.cumulative(x, depth);
                Cumulative {
                    value: f * c.value,
                    error: f * c.error,
                }
            }
        }
    }

    /// Floating-point `m([0, x))`; `xf` is `x` rounded to a double.
    pub(crate) fn cumulative_f64(&self, x: &Rational, xf: f64, depth: u32) -> f64 {
        match self {
            Self::Atoms(a) => a.cdf_f64(x),
            Self::Density(d) => d.cdf_f64(x, xf),
            Self::Cantor(w) => {
                if w.is_zero() {
                    0.0
                } else {
                    rational::to_f64(w) * cantor_function_f64(x, depth)
                }
            }
            Self::Sum(parts) => parts.iter().map(|p| p.cumulative_f64(x, xf, depth)).sum(),
            Self::Scale(f, inner) => {
                if f.is_zero() {
                    0.0
                } else {
                    rational::to_f64(f) * inner.cumulative_f64(x, xf, depth)
                }
            }
        }
    }

    /// Descent depth so that `evaluations` cumulative values stay within `tol` in total.
    pub(crate) fn cantor_depth(&self, tol: &Rational, evaluations: usize) -> u32 {
        let w = self.cantor_weight();
        if w.is_zero() {
            return 0;
        }
        // need w * evaluations * 2^-depth <= tol
        let ratio = w * rational::int(evaluations.max(1) as i64) / tol;
        let mut depth = 0u32;
        let mut p = Rational::one();
        while p < ratio {
            p *= rational::int(2);
            depth += 1;
        }
        depth
    }

    pub fn mass(&self, s: &IntervalSet) -> Result<MassResult> {
        self.mass_with(s, &MassOptions::default())
    }

    pub fn mass_with(&self, s: &IntervalSet, opts: &MassOptions) -> Result<MassResult> {
        let depth = self.cantor_depth(&opts.cantor_tolerance, 2 * s.pieces().len());
        let mut value = Rational::zero();
        let mut error = Rational::zero();
        for (lo, hi) in s.pieces() {
            let a = self.cumulative(lo, depth);
            let b = self.cumulative(hi, depth);
            if opts.exact_only {
                for (c, x) in [(&a, lo), (&b, hi)] {
                    if !c.error.is_zero() {
                        return Err(Error::NonTriadicEndpoint(x.clone()));
                    }
                }
            }
            value += b.value - a.value;
            error += a.error + b.error;
        }
        // the descent under-approximates both ends; the difference can dip
        // below zero only within the error bound
        if value.is_negative() {
            value = Rational::zero();
        }
        Ok(MassResult {
            exact: error.is_zero(),
            value,
            error_bound: error,
        })
    }

    pub fn total_mass(&self) -> Rational {
        match self {
            Self::Atoms(a) => a.prefix.last().unwrap().clone(),
            Self::Density(d) => d.prefix.last().unwrap().clone(),
            Self::Cantor(w) => w.clone(),
            Self::Sum(parts) => parts.iter().map(Self::total_mass).sum(),
            Self::Scale(f, inner) => f * inner.total_mass(),
        }
    }

    /// Split candidates inside `within`: atoms, density breakpoints, dyadic
    /// points of level `<= depth`, and (with a Cantor component) triadic
    /// points of level `<= depth`. Only points strictly inside a piece count.
    pub fn candidate_points(&self, within: &IntervalSet, depth: u32) -> Vec<Rational> {
        let mut out: Vec<Rational> = self
            .structural_points()
            .into_iter()
            .filter(|x| within.has_interior_point(x))
            .collect();
        let cantor = self.has_cantor();
        for (lo, hi) in within.pieces() {
            out.extend(rational::grid_points(lo, hi, 2, depth));
            if cantor {
                out.extend(rational::grid_points(lo, hi, 3, depth));
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn exact_cumulative(value: Rational) -> Cumulative {
    Cumulative {
        value,
        error: Rational::zero(),
    }
}

fn invalid(path: String, reason: impl Into<String>) -> Error {
    Error::InvalidMeasure {
        path,
        reason: reason.into(),
    }
}

/// The Cantor function `C(x)` by triadic descent.
///
/// Digits of `x` in base 3 are read off one at a time: a `0` contributes a
/// binary `0`, a `2` a binary `1`, and the first `1` contributes a binary `1`
/// and ends the expansion. The result is exact when the expansion ends (a
/// `1` digit or a zero remainder, which covers every triadic rational) within
/// `depth` digits; otherwise the truncated value is returned with
/// `exact = false` and lies within `2^-depth` below `C(x)`.
pub fn cantor_function(x: &Rational, depth: u32) -> (Rational, bool) {
    if !x.is_positive() {
        return (Rational::zero(), true);
    }
    if x >= &Rational::one() {
        return (Rational::one(), true);
    }
    if let (Some(p), Some(q)) = (x.numer().to_u64(), x.denom().to_u64()) {
        if depth <= 120 {
            return cantor_small(p as u128, q as u128, depth);
        }
    }
    cantor_big(x.numer().clone(), x.denom().clone(), depth)
}

/// [`cantor_function`] rounded to a double.
fn cantor_function_f64(x: &Rational, depth: u32) -> f64 {
    if let (Some(p), Some(q)) = (x.numer().to_u64(), x.denom().to_u64()) {
        if x.is_positive() && p < q && depth <= 120 {
            let (bits, level) = cantor_bits(p as u128, q as u128, depth);
            return bits as f64 * (-(level as f64)).exp2();
        }
    }
    rational::to_f64(&cantor_function(x, depth).0)
}

/// Binary digits of `C(p/q)` for `0 < p < q`: `(bits, level, exact)`.
fn cantor_bits_exact(mut p: u128, q: u128, depth: u32) -> (u128, u32, bool) {
    let mut bits: u128 = 0;
    for i in 1..=depth {
        let p3 = 3 * p;
        let digit = p3 / q;
        p = p3 % q;
        bits <<= 1;
        match digit {
            1 => return (bits | 1, i, true),
            2 => bits |= 1,
            _ => {}
        }
        if p == 0 {
            return (bits, i, true);
        }
    }
    (bits, depth, false)
}

fn cantor_bits(p: u128, q: u128, depth: u32) -> (u128, u32) {
    let (bits, level, _) = cantor_bits_exact(p, q, depth);
    (bits, level)
}

fn cantor_small(p: u128, q: u128, depth: u32) -> (Rational, bool) {
    let (bits, level, exact) = cantor_bits_exact(p, q, depth);
    (dyadic(BigInt::from(bits), level), exact)
}

fn cantor_big(mut p: BigInt, q: BigInt, depth: u32) -> (Rational, bool) {
    let mut bits = BigInt::zero();
    let one = BigInt::one();
    let two = BigInt::from(2);
    for i in 1..=depth {
        let (digit, rem) = Integer::div_rem(&(&p * 3u32), &q);
        p = rem;
        bits = &bits * &two;
        if digit == one {
            bits += 1;
            return (dyadic(bits, i), true);
        }
        if digit == two {
            bits += 1;
        }
        if p.sign() == Sign::NoSign {
            return (dyadic(bits, i), true);
        }
    }
    (dyadic(bits, depth), false)
}

fn dyadic(numer: BigInt, level: u32) -> Rational {
    Rational::new(numer, rational::pow_int(2, level))
}
