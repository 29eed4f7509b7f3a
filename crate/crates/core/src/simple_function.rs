//! Simple functions over partitions: partition densities, integrals,
//! conditional expectations, `L¹`/`L²` geometry and the exponential
//! functional `π ↦ ∫ e^{-f_π(γ)} dγ`.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::measures::MeasureSpec;
use crate::partition::{overlay, Partition};
use crate::rational::{self, Rational};

/// One rational value per cell of a partition.
///
/// Functions produced by the refinement engine are nonnegative; signed values
/// are allowed so that the min-norm machinery can work with symmetric
/// families such as Rademacher functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleFunction {
    partition: Partition,
    values: Vec<Rational>,
}

impl SimpleFunction {
    pub fn new(partition: Partition, values: Vec<Rational>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::InvalidPartition(format!(
                "{} values for {} cells",
                values.len(),
                partition.len()
            )));
        }
        Ok(Self { partition, values })
    }

    pub fn constant(c: Rational) -> Self {
        Self {
            partition: Partition::trivial(),
            values: vec![c],
        }
    }

    pub fn zero() -> Self {
        Self::constant(Rational::zero())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn cells(&self) -> impl Iterator<Item = (&IntervalSet, &Rational)> {
        self.partition.cells().iter().zip(&self.values)
    }

    pub fn value_at(&self, x: &Rational) -> Option<&Rational> {
        self.partition.cell_of(x).map(|i| &self.values[i])
    }

    /// The same function written on a finer partition.
    pub fn on_partition(&self, fine: &Partition) -> Result<SimpleFunction> {
        if !self.partition.is_refined_by(fine) {
            return Err(Error::NotARefinement);
        }
        let values = overlay(fine, &self.partition)
            .into_iter()
            .map(|o| self.values[o.right].clone())
            .collect();
        Ok(SimpleFunction {
            partition: fine.clone(),
            values,
        })
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> SimpleFunction {
        SimpleFunction {
            partition: self.partition.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    /// `Σ w_k f_k` on the common refinement of all partitions involved.
    pub fn linear_combination(terms: &[(&Rational, &SimpleFunction)]) -> SimpleFunction {
        let Some(first) = terms.first() else {
            return SimpleFunction::zero();
        };
        let common = terms.iter().skip(1).fold(first.1.partition.clone(), |acc, (_, f)| {
            acc.common_refinement(&f.partition)
        });
        let mut values = vec![Rational::zero(); common.len()];
        for (w, f) in terms {
            let on = f.on_partition(&common).expect("common refinement refines every term");
            for (v, x) in values.iter_mut().zip(on.values) {
                *v += *w * x;
            }
        }
        SimpleFunction {
            partition: common,
            values,
        }
    }

    /// Values of `self` and `other` on their common refinement.
    fn pair_on_common<'a>(&'a self, other: &'a SimpleFunction) -> (Partition, Vec<(&'a Rational, &'a Rational)>) {
        let ov = overlay(&self.partition, &other.partition);
        let pairs = ov
            .iter()
            .map(|o| (&self.values[o.left], &other.values[o.right]))
            .collect();
        (
            Partition::new(ov.into_iter().map(|o| o.set).collect()).expect("overlay is a partition"),
            pairs,
        )
    }
}

/// `m(A)` for every cell, in cell order.
pub fn cell_masses(m: &MeasureSpec, p: &Partition) -> Result<Vec<Rational>> {
    p.cells().iter().map(|c| m.mass(c).map(|r| r.value)).collect()
}

/// The partition density `Σ_{A: base(A) > 0} 1_A ν(A)/base(A)`.
pub fn f_pi(nu: &MeasureSpec, base: &MeasureSpec, pi: &Partition) -> Result<SimpleFunction> {
    let nu_m = cell_masses(nu, pi)?;
    let base_m = cell_masses(base, pi)?;
    Ok(SimpleFunction {
        partition: pi.clone(),
        values: ratios(&nu_m, &base_m),
    })
}

pub(crate) fn ratios(num: &[Rational], den: &[Rational]) -> Vec<Rational> {
    num.iter()
        .zip(den)
        .map(|(n, d)| if d.is_positive() { n / d } else { Rational::zero() })
        .collect()
}

/// `∫ φ dm = Σ φ(A) m(A)`.
pub fn integrate(phi: &SimpleFunction, m: &MeasureSpec) -> Result<Rational> {
    let masses = cell_masses(m, &phi.partition)?;
    Ok(phi.values.iter().zip(&masses).map(|(v, w)| v * w).sum())
}

/// `∫_A φ dm`.
pub fn integrate_over(phi: &SimpleFunction, set: &IntervalSet, m: &MeasureSpec) -> Result<Rational> {
    let mut total = Rational::zero();
    for (cell, v) in phi.cells() {
        let part = cell.intersection(set);
        if !part.is_empty() && !v.is_zero() {
            total += v * m.mass(&part)?.value;
        }
    }
    Ok(total)
}

/// `Σ_{A: γ(A) > 0} γ(A) exp(-ν(A)/γ(A))`, summed in cell order.
pub fn exp_functional(nu: &MeasureSpec, gamma: &MeasureSpec, pi: &Partition) -> Result<f64> {
    let nu_m = cell_masses(nu, pi)?;
    let gamma_m = cell_masses(gamma, pi)?;
    exp_functional_from_masses(&nu_m, &gamma_m)
}

pub fn exp_functional_from_masses(nu: &[Rational], gamma: &[Rational]) -> Result<f64> {
    let mut sum = NeumaierSum::default();
    for (i, (n, g)) in nu.iter().zip(gamma).enumerate() {
        if n > g {
            return Err(Error::BaseDominationViolated {
                cell: i,
                nu: Box::new(n.clone()),
                base: Box::new(g.clone()),
            });
        }
        if g.is_positive() {
            sum.add(rational::to_f64(g) * (-rational::to_f64(&(n / g))).exp());
        }
    }
    Ok(sum.value())
}

/// `φ(t) - φ(s) - φ'(s)(t - s)` for `φ = exp(-·)`, with `d = t - s` given
/// exactly. Nonnegative, and zero only when `d == 0`.
pub(crate) fn exp_bregman(s: f64, d: &Rational) -> f64 {
    if d.is_zero() {
        return 0.0;
    }
    let d = rational::to_f64(d);
    let core = if d.abs() < 1e-2 {
        let d2 = d * d;
        d2 * (0.5 - d / 6.0 + d2 / 24.0 - d2 * d / 120.0 + d2 * d2 / 720.0)
    } else {
        (-d).exp_m1() + d
    };
    (-s).exp() * core
}

/// `E^m[f | σ(coarse)]`: the `m`-average of `f` on each coarse cell, zero on
/// `m`-null cells.
pub fn conditional_expectation(f: &SimpleFunction, coarse: &Partition, m: &MeasureSpec) -> Result<SimpleFunction> {
    if !coarse.is_refined_by(&f.partition) {
        return Err(Error::NotARefinement);
    }
    let masses = cell_masses(m, &f.partition)?;
    let mut num = vec![Rational::zero(); coarse.len()];
    let mut den = vec![Rational::zero(); coarse.len()];
    for o in overlay(&f.partition, coarse) {
        // each overlay cell is a whole cell of f
        num[o.right] += &f.values[o.left] * &masses[o.left];
        den[o.right] += &masses[o.left];
    }
    Ok(SimpleFunction {
        partition: coarse.clone(),
        values: ratios(&num, &den),
    })
}

/// `∫ f g dm`.
pub fn l2_inner(f: &SimpleFunction, g: &SimpleFunction, m: &MeasureSpec) -> Result<Rational> {
    let (common, pairs) = f.pair_on_common(g);
    let masses = cell_masses(m, &common)?;
    Ok(pairs.iter().zip(&masses).map(|((a, b), w)| *a * *b * w).sum())
}

/// `∫ |f - g| dm`.
pub fn l1_distance(f: &SimpleFunction, g: &SimpleFunction, m: &MeasureSpec) -> Result<Rational> {
    let (common, pairs) = f.pair_on_common(g);
    let masses = cell_masses(m, &common)?;
    Ok(pairs.iter().zip(&masses).map(|((a, b), w)| (*a - *b).abs() * w).sum())
}

/// Equality `m`-a.e.: equal values on every common cell of positive mass.
pub fn equal_ae(f: &SimpleFunction, g: &SimpleFunction, m: &MeasureSpec) -> Result<bool> {
    let (common, pairs) = f.pair_on_common(g);
    let masses = cell_masses(m, &common)?;
    Ok(pairs.iter().zip(&masses).all(|((a, b), w)| w.is_zero() || a == b))
}

/// `∫_{f ≥ k} f dm`.
pub fn tail_integral(f: &SimpleFunction, k: &Rational, m: &MeasureSpec) -> Result<Rational> {
    let mut total = Rational::zero();
    for (cell, v) in f.cells() {
        if v >= k {
            total += v * m.mass(cell)?.value;
        }
    }
    Ok(total)
}

/// `ν({f ≥ k})`.
pub fn tail_mass(f: &SimpleFunction, k: &Rational, nu: &MeasureSpec) -> Result<Rational> {
    let mut total = Rational::zero();
    for (cell, v) in f.cells() {
        if v >= k {
            total += nu.mass(cell)?.value;
        }
    }
    Ok(total)
}

/// Rigorous rational bounds on a real quantity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: Rational,
    pub hi: Rational,
}

impl Enclosure {
    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// Encloses `e^{-t}` for `t ∈ [0, 1]`: `t` is widened to a dyadic interval of
/// `bits` bits and the Taylor series is cut after `terms` terms with the
/// alternating-series remainder `1/terms!`.
pub fn exp_neg_enclosure(t: &Rational, terms: usize, bits: u32) -> Enclosure {
    assert!(!t.is_negative() && t <= &Rational::one(), "t must lie in [0,1]");
    let scale = Rational::from_integer(rational::pow_int(2, bits));
    let t_lo = Rational::from_integer(rational::floor_int(&(t * &scale))) / &scale;
    let t_hi = Rational::from_integer(rational::ceil_int(&(t * &scale))) / &scale;
    let mut factorial = Rational::one();
    for k in 1..=terms {
        factorial *= rational::int(k as i64);
    }
    let remainder = factorial.recip();
    let taylor = |u: &Rational| {
        let mut sum = Rational::zero();
        let mut term = Rational::one();
        for k in 0..terms {
            sum += &term;
            term = -term * u / rational::int(k as i64 + 1);
        }
        sum
    };
    Enclosure {
        lo: (taylor(&t_hi) - &remainder).max(Rational::zero()),
        hi: taylor(&t_lo) + &remainder,
    }
}

/// Interval enclosure of the Jensen gap
/// `Σ_{A ∈ fine} γ(A) [φ(t_A) − φ(s_A) − φ'(s_A)(t_A − s_A)]`, with
/// `φ = exp(-·)`, `t_A = ν(A)/γ(A)` and `s_A` the value on the coarse cell
/// containing `A`. The sum equals `a(fine) − a(coarse)`.
pub fn jensen_gap_enclosure(
    nu: &MeasureSpec,
    gamma: &MeasureSpec,
    coarse: &Partition,
    fine: &Partition,
    terms: usize,
    bits: u32,
) -> Result<Enclosure> {
    if !coarse.is_refined_by(fine) {
        return Err(Error::NotARefinement);
    }
    let coarse_h = f_pi(nu, gamma, coarse)?;
    let fine_nu = cell_masses(nu, fine)?;
    let fine_gamma = cell_masses(gamma, fine)?;
    let fine_h = ratios(&fine_nu, &fine_gamma);
    let coarse_exp: Vec<Enclosure> = coarse_h
        .values
        .iter()
        .map(|s| exp_neg_enclosure(s, terms, bits))
        .collect();
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    for o in overlay(fine, coarse) {
        let g = &fine_gamma[o.left];
        if g.is_zero() {
            continue;
        }
        let t = &fine_h[o.left];
        let s = &coarse_h.values[o.right];
        if fine_nu[o.left] > *g {
            return Err(Error::BaseDominationViolated {
                cell: o.left,
                nu: Box::new(fine_nu[o.left].clone()),
                base: Box::new(g.clone()),
            });
        }
        if t == s {
            continue;
        }
        let c = Rational::one() - t + s;
        let et = exp_neg_enclosure(t, terms, bits);
        let es = &coarse_exp[o.right];
        lo += g * (&et.lo - &es.hi * &c);
        hi += g * (&et.hi - &es.lo * &c);
    }
    Ok(Enclosure { lo, hi })
}

/// Tightens [`jensen_gap_enclosure`] until its lower end is nonnegative
/// (or the precision ladder runs out) and returns the last enclosure.
pub fn certify_jensen_gap(
    nu: &MeasureSpec,
    gamma: &MeasureSpec,
    coarse: &Partition,
    fine: &Partition,
) -> Result<Enclosure> {
    let mut last = None;
    for (terms, bits) in [(20, 64), (40, 128), (80, 256)] {
        let e = jensen_gap_enclosure(nu, gamma, coarse, fine, terms, bits)?;
        if !e.lo.is_negative() {
            return Ok(e);
        }
        last = Some(e);
    }
    Ok(last.expect("ladder is nonempty"))
}

/// Compensated summation; deterministic for a fixed term order.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
