//! Greedy partition refinement maximizing `a_π = ∫ e^{-f_π(γ)} dγ`.
//!
//! Every cell keeps its best single split among a finite candidate family
//! (atoms, density breakpoints, dyadic and, with a Cantor component, triadic
//! grid points). A round applies the best proposal overall or every improving
//! proposal, and the per-round functional values form the trace.

use std::time::Instant;

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::measures::{default_cantor_tolerance, MeasureSpec};
use crate::partition::Partition;
use crate::rational::{self, Rational};
use crate::simple_function::{exp_bregman, ratios, NeumaierSum, SimpleFunction};

/// Cantor descent depth is sized for this many cumulative evaluations.
const CANTOR_EVALUATION_BUDGET: usize = 1 << 24;

/// Absolute slack for the floating-point monotonicity check on `a_n`.
pub const MONOTONICITY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitMode {
    BestOnly,
    AllImproving,
}

/// Candidate grid depth as a function of the round index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthSchedule {
    /// `offset + slope * round`.
    Linear { offset: u32, slope: u32 },
}

impl DepthSchedule {
    pub fn depth(&self, round: usize) -> u32 {
        match *self {
            DepthSchedule::Linear { offset, slope } => {
                let r = u32::try_from(round).unwrap_or(u32::MAX);
                offset.saturating_add(slope.saturating_mul(r))
            }
        }
    }
}

impl Default for DepthSchedule {
    fn default() -> Self {
        DepthSchedule::Linear { offset: 0, slope: 1 }
    }
}

/// Extra grid levels per base. With lookahead `L`, a piece whose first
/// interior grid point has level `ℓ` is searched at level
/// `min(max(schedule(round), ℓ), ℓ + L)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridLookahead {
    pub dyadic: u32,
    pub triadic: u32,
}

impl Default for GridLookahead {
    fn default() -> Self {
        Self { dyadic: 3, triadic: 1 }
    }
}

impl GridLookahead {
    fn for_base(&self, base: u32) -> u32 {
        if base == 3 {
            self.triadic
        } else {
            self.dyadic
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub max_rounds: usize,
    pub gain_tolerance: f64,
    pub split_mode: SplitMode,
    pub depth_schedule: DepthSchedule,
    pub cantor_tolerance: Rational,
    /// How far past the first grid level meeting a cell piece the search
    /// may go.
    pub lookahead: GridLookahead,
    /// Hard cap on the number of cells.
    pub max_cells: usize,
    /// Store the partition every this many rounds (0 stores only the first
    /// and last).
    pub checkpoint_stride: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_rounds: 30,
            gain_tolerance: 1e-12,
            split_mode: SplitMode::AllImproving,
            depth_schedule: DepthSchedule::default(),
            cantor_tolerance: default_cantor_tolerance(),
            lookahead: GridLookahead::default(),
            max_cells: 1 << 14,
            checkpoint_stride: 10,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_rounds < 1 {
            return bad("max_rounds must be at least 1");
        }
        if !(self.gain_tolerance.is_finite() && self.gain_tolerance > 0.0) {
            return bad("gain_tolerance must be positive and finite");
        }
        if !self.cantor_tolerance.is_positive() {
            return bad("cantor_tolerance must be positive");
        }
        if self.max_cells < 1 {
            return bad("max_cells must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminatedBy {
    GainBelowTolerance,
    RoundLimit,
    CellBudget,
}

impl TerminatedBy {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminatedBy::GainBelowTolerance => "gain_below_tolerance",
            TerminatedBy::RoundLimit => "round_limit",
            TerminatedBy::CellBudget => "cell_budget",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gain_below_tolerance" => Some(TerminatedBy::GainBelowTolerance),
            "round_limit" => Some(TerminatedBy::RoundLimit),
            "cell_budget" => Some(TerminatedBy::CellBudget),
            _ => None,
        }
    }
}

/// One trace row. Round 0 is the trivial partition; later rows exist only
/// for rounds that applied at least one split.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub cells: usize,
    pub a_n: f64,
    /// `‖f_{π_n}(γ) − f_{π_{n−1}}(γ)‖_{L¹(γ)}`.
    pub l1_increment: Rational,
    pub seconds: f64,
}

/// A proposed split. `h_left`/`h_right` are `None` on γ-null sides.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitRecord {
    pub round: usize,
    /// Index of the split cell in the partition the round started from.
    pub cell: usize,
    pub point: Rational,
    pub gain: f64,
    pub h_parent: Rational,
    pub h_left: Option<Rational>,
    pub h_right: Option<Rational>,
    pub applied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub round: usize,
    pub f_gamma: SimpleFunction,
}

impl Checkpoint {
    pub fn partition(&self) -> &Partition {
        self.f_gamma.partition()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefinementTrace {
    pub rounds: Vec<RoundRecord>,
    pub splits: Vec<SplitRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub terminated_by: Option<TerminatedBy>,
}

#[derive(Clone, Debug)]
pub struct EngineOutput {
    pub final_partition: Partition,
    /// `f_{π_N}(γ)`, values in `[0, 1]`.
    pub f_gamma: SimpleFunction,
    /// `f_{π_N}(μ)`.
    pub f_mu: SimpleFunction,
    pub trace: RefinementTrace,
    pub terminated_by: TerminatedBy,
    pub nu_masses: Vec<Rational>,
    pub mu_masses: Vec<Rational>,
    pub gamma_masses: Vec<Rational>,
}

impl EngineOutput {
    pub fn final_a(&self) -> f64 {
        self.trace.rounds.last().map(|r| r.a_n).unwrap_or(f64::NAN)
    }
}

/// How `γ([0, x))` is obtained.
enum GammaCdf<'a> {
    /// `γ = μ + ν`: reuse the ν value and add μ's.
    MuPlusNu(&'a MeasureSpec),
    Direct(&'a MeasureSpec),
}

/// Cumulative masses of ν and γ plus the candidate-point data.
struct Cdfs<'a> {
    nu: &'a MeasureSpec,
    gamma: GammaCdf<'a>,
    depth: u32,
    structural: Vec<Rational>,
    triadic: bool,
}

impl<'a> Cdfs<'a> {
    fn new(nu: &'a MeasureSpec, gamma: &'a MeasureSpec, tol: &Rational) -> Self {
        let gamma_cdf = match gamma {
            MeasureSpec::Sum(parts) if parts.len() == 2 && parts[1] == *nu => GammaCdf::MuPlusNu(&parts[0]),
            _ => GammaCdf::Direct(gamma),
        };
        let depth = nu
            .cantor_depth(tol, CANTOR_EVALUATION_BUDGET)
            .max(gamma.cantor_depth(tol, CANTOR_EVALUATION_BUDGET));
        let mut structural = nu.structural_points();
        structural.extend(gamma.structural_points());
        structural.sort();
        structural.dedup();
        Self {
            nu,
            gamma: gamma_cdf,
            depth,
            structural,
            triadic: nu.has_cantor() || gamma.has_cantor(),
        }
    }

    /// `(ν([0,x)), γ([0,x)))`.
    fn at(&self, x: &Rational) -> (Rational, Rational) {
        let n = self.nu.cumulative(x, self.depth).value;
        let g = match self.gamma {
            GammaCdf::MuPlusNu(mu) => mu.cumulative(x, self.depth).value + &n,
            GammaCdf::Direct(g) => g.cumulative(x, self.depth).value,
        };
        (n, g)
    }

    fn masses(&self, set: &IntervalSet) -> (Rational, Rational) {
        let mut nu = Rational::zero();
        let mut gamma = Rational::zero();
        for (lo, hi) in set.pieces() {
            let (n0, g0) = self.at(lo);
            let (n1, g1) = self.at(hi);
            nu += n1 - n0;
            gamma += g1 - g0;
        }
        (nu, gamma)
    }

    fn bases(&self) -> &'static [u32] {
        if self.triadic {
            &[2, 3]
        } else {
            &[2]
        }
    }

    /// First level with an interior grid point, per (piece, base).
    fn first_levels(&self, set: &IntervalSet) -> Vec<u32> {
        set.pieces()
            .iter()
            .flat_map(|(lo, hi)| {
                self.bases()
                    .iter()
                    .map(move |&b| rational::first_level_inside(lo, hi, b))
            })
            .collect()
    }

    /// Searched grid level per (piece, base).
    fn levels(&self, firsts: &[u32], schedule_depth: u32, lookahead: &GridLookahead) -> Vec<u32> {
        let bases = self.bases();
        firsts
            .iter()
            .enumerate()
            .map(|(i, &first)| {
                schedule_depth
                    .max(first)
                    .min(first + lookahead.for_base(bases[i % bases.len()]))
            })
            .collect()
    }

    fn candidates(&self, set: &IntervalSet, levels: &[u32]) -> Vec<Rational> {
        let mut out = Vec::new();
        let bases = self.bases();
        for (i, (lo, hi)) in set.pieces().iter().enumerate() {
            let start = self.structural.partition_point(|p| p <= lo);
            let end = self.structural.partition_point(|p| p < hi);
            out.extend(self.structural[start..end].iter().cloned());
            for (j, &base) in bases.iter().enumerate() {
                out.extend(rational::grid_points(lo, hi, base, levels[i * bases.len() + j]));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// `(ν([0,x)), γ([0,x)))` in floating point.
    fn at_f64(&self, x: &Rational) -> (f64, f64) {
        let xf = rational::to_f64(x);
        let n = self.nu.cumulative_f64(x, xf, self.depth);
        let g = match self.gamma {
            GammaCdf::MuPlusNu(mu) => mu.cumulative_f64(x, xf, self.depth) + n,
            GammaCdf::Direct(g) => g.cumulative_f64(x, xf, self.depth),
        };
        (n, g)
    }

    /// Best split of `cell`: candidates are ranked by a floating-point gain,
    /// then the winner is recomputed exactly.
    fn best_split(&self, cell: &Cell, levels: &[u32]) -> Option<Proposal> {
        let pieces = cell.set.pieces();
        let ends: Vec<_> = pieces
            .iter()
            .map(|(lo, hi)| (self.at_f64(lo), self.at_f64(hi)))
            .collect();
        let mut prefix = Vec::with_capacity(pieces.len());
        let (mut nu, mut gamma) = (0.0, 0.0);
        for ((n0, g0), (n1, g1)) in &ends {
            prefix.push((nu, gamma));
            nu += n1 - n0;
            gamma += g1 - g0;
        }
        if gamma <= 0.0 {
            return None;
        }
        let h = nu / gamma;
        let mut best: Option<(Rational, f64)> = None;
        for x in self.candidates(&cell.set, levels) {
            let k = cell.set.piece_containing(&x).expect("candidate inside cell");
            let (n, g) = self.at_f64(&x);
            let ((n0, g0), _) = ends[k];
            let nu_left = prefix[k].0 + (n - n0);
            let gamma_left = prefix[k].1 + (g - g0);
            let gain = screen_gain(h, nu_left, gamma_left) + screen_gain(h, nu - nu_left, gamma - gamma_left);
            if best.as_ref().is_none_or(|(_, b)| gain > *b) {
                best = Some((x, gain));
            }
        }
        let (point, _) = best?;
        Some(self.exact_proposal(cell, point))
    }

    fn exact_proposal(&self, cell: &Cell, point: Rational) -> Proposal {
        let k = cell.set.piece_containing(&point).expect("candidate inside cell");
        let (mut nu_left, mut gamma_left) = (Rational::zero(), Rational::zero());
        for (lo, hi) in &cell.set.pieces()[..k] {
            let (n0, g0) = self.at(lo);
            let (n1, g1) = self.at(hi);
            nu_left += n1 - n0;
            gamma_left += g1 - g0;
        }
        let (n0, g0) = self.at(&cell.set.pieces()[k].0);
        let (n, g) = self.at(&point);
        nu_left += n - n0;
        gamma_left += g - g0;
        let h = rational::to_f64(&cell.h);
        let gain = side_gain(h, &cell.h, &nu_left, &gamma_left)
            + side_gain(h, &cell.h, &(&cell.nu - &nu_left), &(&cell.gamma - &gamma_left));
        Proposal {
            point,
            gain,
            nu_left,
            gamma_left,
        }
    }
}

fn screen_gain(h: f64, nu: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let d = nu / gamma - h;
    let core = if d.abs() < 1e-2 {
        let d2 = d * d;
        d2 * (0.5 - d / 6.0 + d2 / 24.0 - d2 * d / 120.0 + d2 * d2 / 720.0)
    } else {
        (-d).exp_m1() + d
    };
    gamma * (-h).exp() * core
}

fn side_gain(h: f64, h_exact: &Rational, nu: &Rational, gamma: &Rational) -> f64 {
    if !gamma.is_positive() {
        return 0.0;
    }
    rational::to_f64(gamma) * exp_bregman(h, &(nu / gamma - h_exact))
}

#[derive(Clone, Debug)]
struct Proposal {
    point: Rational,
    gain: f64,
    nu_left: Rational,
    gamma_left: Rational,
}

#[derive(Clone, Debug)]
struct Cell {
    set: IntervalSet,
    nu: Rational,
    gamma: Rational,
    h: Rational,
    contribution: f64,
    firsts: Vec<u32>,
    cached: Option<(Vec<u32>, Option<Proposal>)>,
}

impl Cell {
    fn new(cdfs: &Cdfs<'_>, set: IntervalSet, nu: Rational, gamma: Rational) -> Self {
        let h = density(&nu, &gamma);
        let contribution = if gamma.is_positive() {
            rational::to_f64(&gamma) * (-rational::to_f64(&h)).exp()
        } else {
            0.0
        };
        Self {
            firsts: cdfs.first_levels(&set),
            set,
            nu,
            gamma,
            h,
            contribution,
            cached: None,
        }
    }

    fn proposal(&self) -> Option<&Proposal> {
        self.cached.as_ref().and_then(|(_, p)| p.as_ref())
    }
}

fn density(nu: &Rational, base: &Rational) -> Rational {
    if base.is_positive() {
        nu / base
    } else {
        Rational::zero()
    }
}

fn side_density(nu: &Rational, gamma: &Rational) -> Option<Rational> {
    gamma.is_positive().then(|| nu / gamma)
}

struct StepOutcome {
    applied: Vec<(usize, Proposal)>,
    best_rejected: Option<(usize, Proposal)>,
    budget_hit: bool,
}

fn refresh_proposals(cdfs: &Cdfs<'_>, cells: &mut [Cell], round: usize, config: &EngineConfig) {
    let depth = config.depth_schedule.depth(round);
    let updates: Vec<Option<(Vec<u32>, Option<Proposal>)>> = cells
        .par_iter()
        .map(|c| {
            let key = cdfs.levels(&c.firsts, depth, &config.lookahead);
            match &c.cached {
                Some((k, _)) if *k == key => None,
                _ => {
                    let p = cdfs.best_split(c, &key);
                    Some((key, p))
                }
            }
        })
        .collect();
    for (c, u) in cells.iter_mut().zip(updates) {
        if u.is_some() {
            c.cached = u;
        }
    }
}

/// Picks the splits of one round; ties go to the leftmost cell (cells are in
/// canonical order) and, within a cell, to the smallest point.
fn select(cells: &[Cell], config: &EngineConfig) -> StepOutcome {
    let best_overall = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.proposal().map(|p| (i, p)))
        .fold(None::<(usize, &Proposal)>, |acc, (i, p)| match acc {
            Some((_, b)) if b.gain >= p.gain => acc,
            _ => Some((i, p)),
        });
    let mut improving: Vec<(usize, &Proposal)> = match config.split_mode {
        SplitMode::BestOnly => best_overall
            .filter(|(_, p)| p.gain > config.gain_tolerance)
            .into_iter()
            .collect(),
        SplitMode::AllImproving => cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.proposal().map(|p| (i, p)))
            .filter(|(_, p)| p.gain > config.gain_tolerance)
            .collect(),
    };
    if improving.is_empty() {
        return StepOutcome {
            applied: Vec::new(),
            best_rejected: best_overall.map(|(i, p)| (i, p.clone())),
            budget_hit: false,
        };
    }
    let room = config.max_cells.saturating_sub(cells.len());
    let budget_hit = improving.len() > room;
    if budget_hit {
        improving.sort_by(|a, b| b.1.gain.total_cmp(&a.1.gain).then(a.0.cmp(&b.0)));
        improving.truncate(room);
        improving.sort_by_key(|(i, _)| *i);
    }
    StepOutcome {
        applied: improving.into_iter().map(|(i, p)| (i, p.clone())).collect(),
        best_rejected: None,
        budget_hit,
    }
}

/// Applies the chosen splits and returns the new cells with the exact
/// `L¹(γ)` increment.
fn apply(cdfs: &Cdfs<'_>, cells: Vec<Cell>, applied: &[(usize, Proposal)]) -> (Vec<Cell>, Rational) {
    let mut out = Vec::with_capacity(cells.len() + applied.len());
    let mut l1 = Rational::zero();
    let mut next = applied.iter().peekable();
    let mut reorder = false;
    for (i, c) in cells.into_iter().enumerate() {
        match next.peek() {
            Some((j, p)) if *j == i => {
                let (ls, rs) = c.set.split_at(&p.point);
                let left = Cell::new(cdfs, ls, p.nu_left.clone(), p.gamma_left.clone());
                let right = Cell::new(cdfs, rs, &c.nu - &p.nu_left, &c.gamma - &p.gamma_left);
                for side in [&left, &right] {
                    l1 += &side.gamma * (&side.h - &c.h).abs();
                }
                reorder |= !c.set.is_contiguous();
                out.push(left);
                out.push(right);
                next.next();
            }
            _ => out.push(c),
        }
    }
    if reorder {
        out.sort_by(|a, b| a.set.cmp_leftmost(&b.set));
    }
    (out, l1)
}

fn functional(cells: &[Cell]) -> f64 {
    let mut s = NeumaierSum::default();
    for c in cells {
        s.add(c.contribution);
    }
    s.value()
}

fn cells_of(cdfs: &Cdfs<'_>, pi: &Partition) -> Result<Vec<Cell>> {
    pi.cells()
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let (nu, gamma) = cdfs.masses(set);
            if nu > gamma {
                return Err(Error::BaseDominationViolated {
                    cell: i,
                    nu: Box::new(nu),
                    base: Box::new(gamma),
                });
            }
            Ok(Cell::new(cdfs, set.clone(), nu, gamma))
        })
        .collect()
}

fn partition_of(cells: &[Cell]) -> Partition {
    Partition::new(cells.iter().map(|c| c.set.clone()).collect()).expect("engine keeps a valid partition")
}

fn f_gamma_of(cells: &[Cell]) -> SimpleFunction {
    SimpleFunction::new(partition_of(cells), cells.iter().map(|c| c.h.clone()).collect()).expect("one value per cell")
}

/// One refinement round from `π`, returning the new partition and the total
/// gain of the applied splits.
pub fn refine_round(
    nu: &MeasureSpec,
    gamma: &MeasureSpec,
    pi: &Partition,
    config: &EngineConfig,
    round: usize,
) -> Result<(Partition, f64)> {
    config.validate()?;
    let cdfs = Cdfs::new(nu, gamma, &config.cantor_tolerance);
    let mut cells = cells_of(&cdfs, pi)?;
    refresh_proposals(&cdfs, &mut cells, round, config);
    let outcome = select(&cells, config);
    let gain = outcome.applied.iter().map(|(_, p)| p.gain).sum();
    let (cells, _) = apply(&cdfs, cells, &outcome.applied);
    Ok((partition_of(&cells), gain))
}

/// Runs the refinement on `ν` against `γ = μ + ν` from the trivial partition.
pub fn run(nu: &MeasureSpec, mu: &MeasureSpec, config: &EngineConfig) -> Result<EngineOutput> {
    config.validate()?;
    let start = Instant::now();
    let gamma = MeasureSpec::sum(vec![mu.clone(), nu.clone()]);
    let cdfs = Cdfs::new(nu, &gamma, &config.cantor_tolerance);
    let mut cells = cells_of(&cdfs, &Partition::trivial())?;
    let mut trace = RefinementTrace::default();
    trace.rounds.push(RoundRecord {
        round: 0,
        cells: cells.len(),
        a_n: functional(&cells),
        l1_increment: Rational::zero(),
        seconds: start.elapsed().as_secs_f64(),
    });
    let stride = config.checkpoint_stride;
    trace.checkpoints.push(Checkpoint {
        round: 0,
        f_gamma: f_gamma_of(&cells),
    });
    let mut terminated_by = TerminatedBy::RoundLimit;
    let mut last_round = 0;
    for round in 1..=config.max_rounds {
        refresh_proposals(&cdfs, &mut cells, round, config);
        let outcome = select(&cells, config);
        if outcome.applied.is_empty() {
            if let Some((i, p)) = &outcome.best_rejected {
                trace.splits.push(split_record(round, *i, &cells[*i], p, false));
            }
            terminated_by = if outcome.budget_hit {
                TerminatedBy::CellBudget
            } else {
                TerminatedBy::GainBelowTolerance
            };
            break;
        }
        for (i, p) in &outcome.applied {
            trace.splits.push(split_record(round, *i, &cells[*i], p, true));
        }
        let (next, l1) = apply(&cdfs, cells, &outcome.applied);
        cells = next;
        last_round = round;
        trace.rounds.push(RoundRecord {
            round,
            cells: cells.len(),
            a_n: functional(&cells),
            l1_increment: l1,
            seconds: start.elapsed().as_secs_f64(),
        });
        if stride > 0 && round % stride == 0 {
            trace.checkpoints.push(Checkpoint {
                round,
                f_gamma: f_gamma_of(&cells),
            });
        }
        if outcome.budget_hit && cells.len() >= config.max_cells {
            terminated_by = TerminatedBy::CellBudget;
            break;
        }
    }
    if trace.checkpoints.last().map(|c| c.round) != Some(last_round) {
        trace.checkpoints.push(Checkpoint {
            round: last_round,
            f_gamma: f_gamma_of(&cells),
        });
    }
    trace.terminated_by = Some(terminated_by);

    let f_gamma = trace.checkpoints.last().expect("final checkpoint").f_gamma.clone();
    let final_partition = f_gamma.partition().clone();
    let nu_masses: Vec<Rational> = cells.iter().map(|c| c.nu.clone()).collect();
    let gamma_masses: Vec<Rational> = cells.iter().map(|c| c.gamma.clone()).collect();
    let mu_masses: Vec<Rational> = cells.iter().map(|c| &c.gamma - &c.nu).collect();
    let f_mu = SimpleFunction::new(final_partition.clone(), ratios(&nu_masses, &mu_masses))?;
    Ok(EngineOutput {
        final_partition,
        f_gamma,
        f_mu,
        trace,
        terminated_by,
        nu_masses,
        mu_masses,
        gamma_masses,
    })
}

fn split_record(round: usize, index: usize, cell: &Cell, p: &Proposal, applied: bool) -> SplitRecord {
    SplitRecord {
        round,
        cell: index,
        point: p.point.clone(),
        gain: p.gain,
        h_parent: cell.h.clone(),
        h_left: side_density(&p.nu_left, &p.gamma_left),
        h_right: side_density(&(&cell.nu - &p.nu_left), &(&cell.gamma - &p.gamma_left)),
        applied,
    }
}

/// Summary of a verified trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceReport {
    pub rounds: usize,
    pub final_cells: usize,
    pub final_a: f64,
    /// `a_N − a_0`.
    pub total_gain: f64,
    pub zero_gain_splits: usize,
    pub terminated_by: Option<TerminatedBy>,
}

/// Checks that `a_n` never decreases (beyond [`MONOTONICITY_SLACK`]), that
/// the cell count strictly increases, and that every split proposal with
/// zero gain has equal values on its γ-positive sides.
pub fn verify_trace(trace: &RefinementTrace) -> Result<TraceReport> {
    let first = trace.rounds.first().ok_or(Error::EmptyInput("trace has no rounds"))?;
    for w in trace.rounds.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        if cur.a_n < prev.a_n - MONOTONICITY_SLACK || cur.a_n.is_nan() {
            return Err(Error::MonotonicityViolation {
                round: cur.round,
                previous: prev.a_n,
                current: cur.a_n,
            });
        }
        if cur.cells <= prev.cells {
            return Err(Error::CellCountNotIncreasing(cur.round));
        }
    }
    let mut zero_gain_splits = 0;
    for s in &trace.splits {
        if s.gain != 0.0 {
            continue;
        }
        zero_gain_splits += 1;
        let sides: Vec<&Rational> = [&s.h_left, &s.h_right].into_iter().flatten().collect();
        if let Some(bad) = sides.iter().find(|h| ***h != s.h_parent) {
            return Err(Error::JensenEqualityViolation {
                round: s.round,
                cell: s.cell,
                left: Box::new((*bad).clone()),
                right: Box::new(s.h_parent.clone()),
            });
        }
    }
    let last = trace.rounds.last().expect("nonempty");
    Ok(TraceReport {
        rounds: trace.rounds.len(),
        final_cells: last.cells,
        final_a: last.a_n,
        total_gain: last.a_n - first.a_n,
        zero_gain_splits,
        terminated_by: trace.terminated_by,
    })
}

impl RefinementTrace {
    pub const CSV_HEADER: &'static str = "round,cells,a_n,l1_increment,seconds";

    /// CSV rows; with `timing == false` the seconds column is written as 0 so
    /// that identical runs produce identical bytes.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rounds {
            let secs = if timing { r.seconds } else { 0.0 };
            out.push_str(&format!(
                "{},{},{:?},{},{:.6}\n",
                r.round,
                r.cells,
                r.a_n,
                rational::format(&r.l1_increment),
                secs
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == Self::CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    path: "line 1".into(),
                    reason: format!("expected header `{}`", Self::CSV_HEADER),
                })
            }
        }
        let mut rounds = Vec::new();
        for (n, line) in lines {
            let path = format!("line {}", n + 1);
            let err = |reason: String| Error::Parse {
                path: path.clone(),
                reason,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", fields.len())));
            }
            rounds.push(RoundRecord {
                round: fields[0].parse().map_err(|e| err(format!("round: {e}")))?,
                cells: fields[1].parse().map_err(|e| err(format!("cells: {e}")))?,
                a_n: fields[2].parse().map_err(|e| err(format!("a_n: {e}")))?,
                l1_increment: rational::parse(fields[3]).map_err(|e| err(format!("l1_increment: {e}")))?,
                seconds: fields[4].parse().map_err(|e| err(format!("seconds: {e}")))?,
            });
        }
        Ok(Self {
            rounds,
            ..Self::default()
        })
    }
}
