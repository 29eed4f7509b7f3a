//! Finite unions of half-open rational intervals inside `[0, 1)`.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// A canonical finite union of `[lo, hi)` pieces: sorted, pairwise disjoint,
/// with touching pieces merged. Two equal sets always have identical pieces.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    pieces: Vec<(Rational, Rational)>,
}

impl IntervalSet {
    /// Validates that `pieces` is already canonical.
    pub fn new(pieces: Vec<(Rational, Rational)>) -> Result<Self> {
        for (i, (lo, hi)) in pieces.iter().enumerate() {
            if lo.is_negative_or_above_one() || hi > &Rational::one() || lo >= hi {
                return Err(Error::InvalidSet(format!(
                    "piece {i} = [{}, {}) is not a nonempty subinterval of [0,1)",
                    rational::format(lo),
                    rational::format(hi)
                )));
            }
            if i > 0 && pieces[i - 1].1 >= *lo {
                return Err(Error::InvalidSet(format!(
                    "pieces {} and {i} overlap, touch, or are out of order",
                    i - 1
                )));
            }
        }
        Ok(Self { pieces })
    }

    /// Sorts, clips and merges arbitrary pieces; empty pieces are dropped.
    pub fn from_pieces(mut pieces: Vec<(Rational, Rational)>) -> Result<Self> {
        for (lo, hi) in &pieces {
            if lo.is_negative_or_above_one() || hi > &Rational::one() {
                return Err(Error::InvalidSet(format!(
                    "[{}, {}) leaves [0,1)",
                    rational::format(lo),
                    rational::format(hi)
                )));
            }
        }
        pieces.retain(|(lo, hi)| lo < hi);
        pieces.sort();
        Ok(Self {
            pieces: merge_sorted(pieces),
        })
    }

    pub fn interval(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn unit() -> Self {
        Self {
            pieces: vec![(Rational::zero(), Rational::one())],
        }
    }

    pub fn pieces(&self) -> &[(Rational, Rational)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn is_contiguous(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn leftmost(&self) -> Option<&Rational> {
        self.pieces.first().map(|p| &p.0)
    }

    pub fn rightmost(&self) -> Option<&Rational> {
        self.pieces.last().map(|p| &p.1)
    }

    /// Lebesgue measure.
    pub fn length(&self) -> Rational {
        self.pieces
            .iter()
            .fold(Rational::zero(), |acc, (lo, hi)| acc + (hi - lo))
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        self.piece_containing(x).is_some()
    }

    pub fn piece_containing(&self, x: &Rational) -> Option<usize> {
        let idx = self.pieces.partition_point(|(lo, _)| lo <= x);
        if idx == 0 {
            return None;
        }
        let (_, hi) = &self.pieces[idx - 1];
        (x < hi).then_some(idx - 1)
    }

    /// Whether `x` lies strictly inside one of the pieces.
    pub fn has_interior_point(&self, x: &Rational) -> bool {
        self.piece_containing(x).map(|i| &self.pieces[i].0 < x).unwrap_or(false)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.pieces.len() && j < other.pieces.len() {
            let (a_lo, a_hi) = &self.pieces[i];
            let (b_lo, b_hi) = &other.pieces[j];
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a_hi <= b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // intersections of canonical sets may touch at a shared endpoint
        Self {
            pieces: merge_sorted(out),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<_> = self.pieces.iter().chain(&other.pieces).cloned().collect();
        all.sort();
        Self {
            pieces: merge_sorted(all),
        }
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = Rational::zero();
        for (lo, hi) in &self.pieces {
            if &cursor < lo {
                out.push((cursor.clone(), lo.clone()));
            }
            cursor = hi.clone();
        }
        if cursor < Rational::one() {
            out.push((cursor, Rational::one()));
        }
        Self { pieces: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersection(&other.complement())
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.pieces.iter().all(|(lo, hi)| match other.piece_containing(lo) {
            Some(k) => hi <= &other.pieces[k].1,
            None => false,
        })
    }

    pub fn is_disjoint_from(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    /// `self ∩ [0, x)` and `self ∩ [x, 1)`.
    pub fn split_at(&self, x: &Rational) -> (Self, Self) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (lo, hi) in &self.pieces {
            if hi <= x {
                left.push((lo.clone(), hi.clone()));
            } else if lo >= x {
                right.push((lo.clone(), hi.clone()));
            } else {
                left.push((lo.clone(), x.clone()));
                right.push((x.clone(), hi.clone()));
            }
        }
        (Self { pieces: left }, Self { pieces: right })
    }

    /// Orders sets by leftmost endpoint; the empty set sorts first.
    pub fn cmp_leftmost(&self, other: &Self) -> Ordering {
        self.leftmost().cmp(&other.leftmost())
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "∅");
        }
        for (i, (lo, hi)) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {})", rational::format(lo), rational::format(hi))?;
        }
        Ok(())
    }
}

fn merge_sorted(pieces: Vec<(Rational, Rational)>) -> Vec<(Rational, Rational)> {
    let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(pieces.len());
    for (lo, hi) in pieces {
        match out.last_mut() {
            Some(last) if last.1 >= lo => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

trait UnitRange {
    fn is_negative_or_above_one(&self) -> bool;
}

impl UnitRange for Rational {
    fn is_negative_or_above_one(&self) -> bool {
        self < &Rational::zero() || self >= &Rational::one()
    }
}
