//! Finite partitions of `[0, 1)` ordered by refinement.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::rational::Rational;

/// Pairwise disjoint, nonempty cells covering `[0, 1)`, sorted by leftmost
/// endpoint. Cells need not be intervals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    cells: Vec<IntervalSet>,
}

impl Partition {
    pub fn new(mut cells: Vec<IntervalSet>) -> Result<Self> {
        if cells.iter().any(IntervalSet::is_empty) {
            return Err(Error::InvalidPartition("empty cell".into()));
        }
        cells.sort_by(|a, b| a.cmp_leftmost(b));
        let mut pieces: Vec<&(Rational, Rational)> = cells.iter().flat_map(|c| c.pieces()).collect();
        pieces.sort();
        let mut cursor = Rational::zero();
        for (lo, hi) in pieces {
            if *lo != cursor {
                return Err(Error::InvalidPartition(if *lo < cursor {
                    "cells overlap".into()
                } else {
                    "cells do not cover [0,1)".into()
                }));
            }
            cursor = hi.clone();
        }
        if !cursor.is_one() {
            return Err(Error::InvalidPartition("cells do not cover [0,1)".into()));
        }
        Ok(Self { cells })
    }

    pub fn trivial() -> Self {
        Self {
            cells: vec![IntervalSet::unit()],
        }
    }

    /// Contiguous partition with the given interior cut points (any order).
    pub fn from_cuts(mut cuts: Vec<Rational>) -> Result<Self> {
        cuts.sort();
        cuts.dedup();
        let mut cells = Vec::with_capacity(cuts.len() + 1);
        let mut lo = Rational::zero();
        for c in cuts {
            cells.push(IntervalSet::interval(lo, c.clone())?);
            lo = c;
        }
        cells.push(IntervalSet::interval(lo, Rational::one())?);
        Ok(Self { cells })
    }

    /// Dyadic intervals of the given level.
    pub fn dyadic(level: u32) -> Self {
        let n = 1i64 << level;
        Self::from_cuts((1..n).map(|k| crate::rational::ratio(k, n)).collect()).expect("valid cuts")
    }

    pub fn cells(&self) -> &[IntervalSet] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: &Rational) -> Option<usize> {
        self.cells.iter().position(|c| c.contains_point(x))
    }

    pub fn split_cell(&self, cell_index: usize, point: &Rational) -> Result<Self> {
        self.split_many(&[(cell_index, point.clone())])
    }

    /// Applies several splits at once; several points may target one cell.
    pub fn split_many(&self, splits: &[(usize, Rational)]) -> Result<Self> {
        let mut by_cell: Vec<Vec<&Rational>> = vec![Vec::new(); self.cells.len()];
        for (cell, point) in splits {
            let target = self.cells.get(*cell).ok_or(Error::CellOutOfRange(*cell))?;
            if !target.has_interior_point(point) {
                return Err(Error::PointNotInterior {
                    cell: *cell,
                    point: point.clone(),
                });
            }
            by_cell[*cell].push(point);
        }
        let mut cells = Vec::with_capacity(self.cells.len() + splits.len());
        let mut reorder = false;
        for (cell, mut points) in self.cells.iter().zip(by_cell) {
            if points.is_empty() {
                cells.push(cell.clone());
                continue;
            }
            points.sort();
            points.dedup();
            reorder |= !cell.is_contiguous();
            let mut rest = cell.clone();
            for p in points {
                let (left, right) = rest.split_at(p);
                cells.push(left);
                rest = right;
            }
            cells.push(rest);
        }
        if reorder {
            cells.sort_by(|a, b| a.cmp_leftmost(b));
        }
        Ok(Self { cells })
    }

    /// The coarsest partition refining both: all nonempty `A ∩ B`.
    pub fn common_refinement(&self, other: &Self) -> Self {
        let overlay = overlay(self, other);
        Self {
            cells: overlay.into_iter().map(|o| o.set).collect(),
        }
    }

    /// True iff every cell of `fine` lies inside a cell of `self`.
    pub fn is_refined_by(&self, fine: &Self) -> bool {
        let owner = PieceIndex::new(self);
        fine.cells.iter().all(|cell| {
            let Some(first) = owner.cell_of(cell.leftmost().expect("nonempty")) else {
                return false;
            };
            cell.pieces().iter().all(|(lo, hi)| owner.covers(first, lo, hi))
        })
    }
}

pub fn trivial_partition() -> Partition {
    Partition::trivial()
}

pub fn is_refinement(coarse: &Partition, fine: &Partition) -> bool {
    coarse.is_refined_by(fine)
}

pub fn common_refinement(i: &Partition, j: &Partition) -> Partition {
    i.common_refinement(j)
}

/// A cell of `a ∨ b` with the indices of the cells of `a` and `b` it came from.
#[derive(Clone, Debug)]
pub(crate) struct OverlayCell {
    pub set: IntervalSet,
    pub left: usize,
    pub right: usize,
}

/// Common refinement with provenance, in canonical cell order.
pub(crate) fn overlay(a: &Partition, b: &Partition) -> Vec<OverlayCell> {
    let ap = labelled_pieces(a);
    let bp = labelled_pieces(b);
    let mut segments: Vec<((usize, usize), (Rational, Rational))> = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ap.len() && j < bp.len() {
        let (a_lo, a_hi, ai) = &ap[i];
        let (b_lo, b_hi, bj) = &bp[j];
        let lo = a_lo.max(b_lo);
        let hi = a_hi.min(b_hi);
        if lo < hi {
            segments.push(((*ai, *bj), (lo.clone(), hi.clone())));
        }
        if a_hi <= b_hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    // group by label, keeping first-appearance order (= leftmost order)
    let mut index: std::collections::HashMap<(usize, usize), usize> = Default::default();
    type Pieces = Vec<(Rational, Rational)>;
    let mut groups: Vec<((usize, usize), Pieces)> = Vec::new();
    for (label, piece) in segments {
        match index.get(&label) {
            Some(&g) => groups[g].1.push(piece),
            None => {
                index.insert(label, groups.len());
                groups.push((label, vec![piece]));
            }
        }
    }
    groups
        .into_iter()
        .map(|((left, right), pieces)| OverlayCell {
            set: IntervalSet::from_pieces(pieces).expect("pieces inside [0,1)"),
            left,
            right,
        })
        .collect()
}

fn labelled_pieces(p: &Partition) -> Vec<(Rational, Rational, usize)> {
    let mut out: Vec<_> = p
        .cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.pieces().iter().map(move |(lo, hi)| (lo.clone(), hi.clone(), i)))
        .collect();
    out.sort();
    out
}

/// Sorted pieces of a partition with their owning cells.
struct PieceIndex {
    pieces: Vec<(Rational, Rational, usize)>,
}

impl PieceIndex {
    fn new(p: &Partition) -> Self {
        Self {
            pieces: labelled_pieces(p),
        }
    }

    fn position(&self, x: &Rational) -> Option<usize> {
        let idx = self.pieces.partition_point(|(lo, _, _)| lo <= x);
        (idx > 0 && x < &self.pieces[idx - 1].1).then(|| idx - 1)
    }

    fn cell_of(&self, x: &Rational) -> Option<usize> {
        self.position(x).map(|k| self.pieces[k].2)
    }

    /// `[lo, hi)` lies inside cell `cell` (possibly across adjacent pieces of it).
    fn covers(&self, cell: usize, lo: &Rational, hi: &Rational) -> bool {
        let Some(mut k) = self.position(lo) else {
            return false;
        };
        loop {
            let (_, p_hi, owner) = &self.pieces[k];
            if *owner != cell {
                return false;
            }
            if hi <= p_hi {
                return true;
            }
            k += 1;
            if k == self.pieces.len() {
                return false;
            }
        }
    }
}
