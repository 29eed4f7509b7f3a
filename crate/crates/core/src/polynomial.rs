//! Exact univariate polynomials over the rationals.
//!
//! Only what the density measures need: evaluation, exact antiderivatives,
//! and a Sturm-sequence certificate that a polynomial is nonnegative on a
//! closed interval.

use num_traits::{One, Signed, Zero};

use crate::rational::{self, Rational};

/// Coefficients in ascending powers of `x` (absolute coordinate, not local).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<Rational>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    /// `∫_0^x p`.
    pub fn antiderivative_at(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * x + c / rational::int(k as i64 + 1);
        }
        acc * x
    }

    /// `∫_a^b p`.
    pub fn integral(&self, a: &Rational, b: &Rational) -> Rational {
        self.antiderivative_at(b) - self.antiderivative_at(a)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * rational::int(k as i64))
                .collect(),
        )
    }

    fn leading(&self) -> &Rational {
        self.coeffs.last().expect("nonzero polynomial")
    }

    /// Polynomial long division, `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        assert!(!divisor.is_zero(), "division by zero polynomial");
        let dd = divisor.coeffs.len() - 1;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Self::new(vec![]), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        let lead = divisor.leading().clone();
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in divisor.coeffs.iter().enumerate() {
                    rem[k + j] -= &c * dc;
                }
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a
    }

    /// `p / gcd(p, p')`: same roots, all simple.
    pub fn squarefree_part(&self) -> Self {
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        self.div_rem(&g).0
    }

    /// Whether `p(x) >= 0` for every `x` in `[lo, hi]`.
    ///
    /// Distinct interior roots of the squarefree part are isolated by
    /// bisection with Sturm counts; the sign is then checked at a non-root
    /// point on each side of every root.
    pub fn is_nonnegative_on(&self, lo: &Rational, hi: &Rational) -> bool {
        if self.is_zero() {
            return true;
        }
        if self.eval(lo).is_negative() || self.eval(hi).is_negative() {
            return false;
        }
        // strip roots sitting exactly on the endpoints
        let mut q = self.squarefree_part();
        for end in [lo, hi] {
            if q.eval(end).is_zero() {
                q = q.div_rem(&Polynomial::new(vec![-end.clone(), Rational::one()])).0;
            }
        }
        if q.degree().unwrap_or(0) == 0 {
            // no interior roots: one interior sample fixes the sign
            return !self.eval(&((lo + hi) / rational::int(2))).is_negative();
        }
        let sturm = SturmSequence::new(&q);
        let mut stack = vec![(lo.clone(), hi.clone())];
        while let Some((a, b)) = stack.pop() {
            match sturm.count_between(&a, &b) {
                0 => {
                    if self.eval(&((&a + &b) / rational::int(2))).is_negative() {
                        return false;
                    }
                }
                1 if &a != lo && &b != hi => {
                    if self.eval(&a).is_negative() || self.eval(&b).is_negative() {
                        return false;
                    }
                }
                _ => {
                    let mid = non_root_near(&q, &a, &b);
                    stack.push((a, mid.clone()));
                    stack.push((mid, b));
                }
            }
        }
        true
    }
}

/// A point of `(a, b)` near the midpoint where `q` does not vanish.
fn non_root_near(q: &Polynomial, a: &Rational, b: &Rational) -> Rational {
    let mut t = rational::ratio(1, 2);
    loop {
        let x = a + (b - a) * &t;
        if !q.eval(&x).is_zero() {
            return x;
        }
        t = (t + rational::int(1)) / rational::int(2);
    }
}

struct SturmSequence {
    seq: Vec<Polynomial>,
}

impl SturmSequence {
    fn new(p: &Polynomial) -> Self {
        let mut seq = vec![p.clone(), p.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let (_, r) = seq[n - 2].div_rem(&seq[n - 1]);
            if r.is_zero() {
                break;
            }
            seq.push(Polynomial::new(r.coeffs.into_iter().map(|c| -c).collect()));
        }
        Self { seq }
    }

    fn sign_changes(&self, x: &Rational) -> usize {
        let signs: Vec<i8> = self
            .seq
            .iter()
            .map(|p| {
                let v = p.eval(x);
                if v.is_positive() {
                    1
                } else if v.is_negative() {
                    -1
                } else {
                    0
                }
            })
            .filter(|&s| s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Distinct roots in `(a, b)` for non-root endpoints.
    fn count_between(&self, a: &Rational, b: &Rational) -> usize {
        self.sign_changes(a).saturating_sub(self.sign_changes(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn poly(c: &[i64]) -> Polynomial {
        Polynomial::new(c.iter().map(|&v| int(v)).collect())
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        // p = 1 + 2x + 3x^2 ; ∫_0^1 = 1 + 1 + 1
        let p = poly(&[1, 2, 3]);
        assert_eq!(p.integral(&int(0), &int(1)), int(3));
        assert_eq!(
            p.integral(&ratio(1, 2), &int(1)),
            int(3) - (ratio(1, 2) + ratio(1, 4) + ratio(1, 8))
        );
    }

    #[test]
    fn division_and_gcd() {
        // (x-1)^2 (x+1)
        let p = poly(&[1, -1, -1, 1]);
        let sf = p.squarefree_part();
        assert_eq!(sf.degree(), Some(2));
        assert!(sf.eval(&int(1)).is_zero());
        assert!(sf.eval(&int(-1)).is_zero());
        let (q, r) = p.div_rem(&poly(&[-1, 1]));
        assert!(r.is_zero());
        assert_eq!(q, poly(&[-1, 0, 1]));
    }

    #[test]
    fn nonnegativity_certificates() {
        // (x - 1/2)^2 touches zero inside: nonnegative
        let touch = Polynomial::new(vec![ratio(1, 4), int(-1), int(1)]);
        assert!(touch.is_nonnegative_on(&int(0), &int(1)));
        // x - 1/2 crosses zero inside
        let cross = Polynomial::new(vec![ratio(-1, 2), int(1)]);
        assert!(!cross.is_nonnegative_on(&int(0), &int(1)));
        assert!(cross.is_nonnegative_on(&ratio(1, 2), &int(1)));
        // x(1-x) vanishes at both endpoints, positive inside
        let bump = poly(&[0, 1, -1]);
        assert!(bump.is_nonnegative_on(&int(0), &int(1)));
        // (x-1/3)(x-2/3) negative between its roots
        let dip = Polynomial::new(vec![ratio(2, 9), int(-1), int(1)]);
        assert!(!dip.is_nonnegative_on(&int(0), &int(1)));
        assert!(dip.is_nonnegative_on(&int(0), &ratio(1, 3)));
        // (x-1/3)^2 (x-2/3)^2 has two double roots inside
        let two = touch_sq(ratio(1, 3), ratio(2, 3));
        assert!(two.is_nonnegative_on(&int(0), &int(1)));
        assert!(Polynomial::new(vec![]).is_nonnegative_on(&int(0), &int(1)));
        assert!(!poly(&[-1]).is_nonnegative_on(&int(0), &int(1)));
    }

    fn touch_sq(r1: Rational, r2: Rational) -> Polynomial {
        let a = Polynomial::new(vec![-r1, int(1)]);
        let b = Polynomial::new(vec![-r2, int(1)]);
        let ab = mul(&a, &b);
        mul(&ab, &ab)
    }

    fn mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
        let mut out = vec![Rational::zero(); a.coeffs.len() + b.coeffs.len() - 1];
        for (i, x) in a.coeffs.iter().enumerate() {
            for (j, y) in b.coeffs.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Polynomial::new(out)
    }
}
