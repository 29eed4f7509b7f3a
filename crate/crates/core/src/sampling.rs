//! Seeded random instances from the measure grammar.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::measures::MeasureSpec;
use crate::partition::Partition;
use crate::rational::{int, ratio, Rational};
use crate::simple_function::SimpleFunction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Grid on which random points are drawn. Cantor masses are exact only at
/// triadic points, so measures with a Cantor part use a triadic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid(pub i64);

impl Grid {
    pub fn for_measures(ms: &[&MeasureSpec]) -> Self {
        if ms.iter().any(|m| m.has_cantor()) {
            Grid(81)
        } else {
            Grid(120)
        }
    }
}

fn small(rng: &mut impl Rng, max: i64, den: i64) -> Rational {
    ratio(rng.gen_range(0..=max), den)
}

fn sorted_cuts(rng: &mut impl Rng, den: i64, count: usize) -> Vec<i64> {
    let mut cuts: Vec<i64> = (0..count).map(|_| rng.gen_range(1..den)).collect();
    cuts.push(0);
    cuts.push(den);
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Random sum of atoms, a polynomial density, and optionally a Cantor part.
pub fn random_measure(rng: &mut impl Rng, cantor: bool) -> MeasureSpec {
    let den = if cantor { 81 } else { 120 };
    let mut parts = Vec::new();
    if rng.gen_bool(0.6) {
        let n = rng.gen_range(1..=3);
        let mut locs: Vec<i64> = (0..n).map(|_| rng.gen_range(0..den)).collect();
        locs.sort_unstable();
        locs.dedup();
        let pairs = locs.into_iter().map(|l| (ratio(l, den), small(rng, 6, 4))).collect();
        parts.push(MeasureSpec::atoms(pairs).expect("valid atoms"));
    }
    if rng.gen_bool(0.8) {
        let count = rng.gen_range(0..=3);
        let cuts = sorted_cuts(rng, den, count);
        let coeffs = cuts
            .windows(2)
            .map(|_| {
                // a + b·x with a, b ≥ 0 stays nonnegative on [0, 1)
                if rng.gen_bool(0.7) {
                    vec![small(rng, 8, 3)]
                } else {
                    vec![small(rng, 4, 2), small(rng, 4, 2)]
                }
            })
            .collect();
        let bps = cuts.iter().map(|c| ratio(*c, den)).collect();
        parts.push(MeasureSpec::density(bps, coeffs).expect("valid density"));
    }
    if cantor && rng.gen_bool(0.5) {
        parts.push(MeasureSpec::cantor(small(rng, 4, 2)).expect("valid Cantor weight"));
    }
    let m = MeasureSpec::sum(parts);
    if rng.gen_bool(0.2) {
        MeasureSpec::scale(ratio(rng.gen_range(1..=5), 3), m).expect("valid scale")
    } else {
        m
    }
}

/// Random partition whose cells are unions of grid intervals, some of them
/// non-contiguous.
pub fn random_partition(rng: &mut impl Rng, grid: Grid, max_pieces: usize) -> Partition {
    let count = rng.gen_range(0..max_pieces.max(1));
    let cuts = sorted_cuts(rng, grid.0, count);
    let mut pieces: Vec<(Rational, Rational)> = cuts
        .windows(2)
        .map(|w| (ratio(w[0], grid.0), ratio(w[1], grid.0)))
        .collect();
    pieces.shuffle(rng);
    let cells_wanted = rng.gen_range(1..=pieces.len());
    let mut cells: Vec<Vec<(Rational, Rational)>> = vec![Vec::new(); cells_wanted];
    for (i, p) in pieces.into_iter().enumerate() {
        let c = if i < cells_wanted {
            i
        } else {
            rng.gen_range(0..cells_wanted)
        };
        cells[c].push(p);
    }
    let sets = cells
        .into_iter()
        .map(|c| crate::interval_set::IntervalSet::from_pieces(c).expect("disjoint grid pieces"))
        .collect();
    Partition::new(sets).expect("cells cover [0, 1)")
}

/// Refines `pi` by splitting random cells at random grid points.
pub fn random_refinement(rng: &mut impl Rng, pi: &Partition, grid: Grid, splits: usize) -> Partition {
    let mut out = pi.clone();
    for _ in 0..splits {
        let cell = rng.gen_range(0..out.len());
        let pieces = out.cells()[cell].pieces().to_vec();
        let (lo, hi) = pieces.choose(rng).expect("nonempty cell").clone();
        let index = |q: Rational| -> i64 { q.to_integer().try_into().expect("grid index") };
        let first = index((&lo * int(grid.0)).floor()) + 1;
        let last = index((&hi * int(grid.0)).ceil()) - 1;
        if first <= last {
            let point = ratio(rng.gen_range(first..=last), grid.0);
            out = out.split_cell(cell, &point).expect("interior point");
        }
    }
    out
}

pub fn random_simple_function(rng: &mut impl Rng, pi: &Partition) -> SimpleFunction {
    let values = (0..pi.len())
        .map(|_| ratio(rng.gen_range(-12..=12), rng.gen_range(1..=6)))
        .collect();
    SimpleFunction::new(pi.clone(), values).expect("one value per cell")
}

/// Step function on the dyadic partition of the given level with values
/// `k/den`, `0 ≤ k < max_numerator`.
pub fn dyadic_step(rng: &mut impl Rng, level: u32, max_numerator: i64, den: i64) -> SimpleFunction {
    let values = (0..1usize << level)
        .map(|_| ratio(rng.gen_range(0..max_numerator), den))
        .collect();
    SimpleFunction::new(Partition::dyadic(level), values).expect("one value per cell")
}

/// The measure with density `f` against Lebesgue measure.
pub fn step_measure(f: &SimpleFunction) -> MeasureSpec {
    let mut bps = vec![int(0)];
    let mut values = Vec::new();
    let mut cells: Vec<_> = f.cells().collect();
    cells.sort_by(|a, b| a.0.cmp_leftmost(b.0));
    for (set, v) in cells {
        for (_, hi) in set.pieces() {
            bps.push(hi.clone());
            values.push(v.clone());
        }
    }
    MeasureSpec::piecewise_constant(bps, values).expect("step density")
}
