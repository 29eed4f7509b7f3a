//! Minimum-norm points of convex hulls of simple functions in `L²(m)` and
//! forward convex combinations built from them.

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::measures::MeasureSpec;
use crate::rational::{self, Rational};
use crate::simple_function::{l2_inner, SimpleFunction};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200_000;
const POLISH_EVERY: usize = 25;
const ACTIVE_WEIGHT: f64 = 1e-15;
const SNAP_TOLERANCE: f64 = 1e-12;
const SNAP_MAX_DENOMINATOR: i128 = 1 << 40;

/// `Σ weights[i] · f_{indices[i]}` with exact simplex weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvexWeights {
    indices: Vec<usize>,
    weights: Vec<Rational>,
}

impl ConvexWeights {
    pub fn new(indices: Vec<usize>, weights: Vec<Rational>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if indices.is_empty() || indices.len() != weights.len() {
            return bad("need one weight per index and at least one index".into());
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return bad("indices must increase strictly".into());
        }
        if weights.iter().any(|w| w < &Rational::zero()) {
            return bad("weights must be nonnegative".into());
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return bad(format!("weights sum to {}", rational::format(&total)));
        }
        Ok(Self { indices, weights })
    }

    pub fn single(index: usize) -> Self {
        Self {
            indices: vec![index],
            weights: vec![Rational::one()],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn min_index(&self) -> usize {
        self.indices[0]
    }

    pub fn weight_of(&self, index: usize) -> Rational {
        match self.indices.binary_search(&index) {
            Ok(i) => self.weights[i].clone(),
            Err(_) => Rational::zero(),
        }
    }

    /// Reads `self` as weights over `inner`'s combinations and returns the
    /// equivalent weights over the original functions.
    pub fn compose(&self, inner: &[ConvexWeights]) -> ConvexWeights {
        let mut acc: std::collections::BTreeMap<usize, Rational> = Default::default();
        for (j, w) in self.indices.iter().zip(&self.weights) {
            for (i, v) in inner[*j].indices.iter().zip(&inner[*j].weights) {
                *acc.entry(*i).or_insert_with(Rational::zero) += w * v;
            }
        }
        acc.retain(|_, w| !w.is_zero());
        let (indices, weights) = acc.into_iter().unzip();
        ConvexWeights { indices, weights }
    }

    pub fn combine(&self, fs: &[SimpleFunction]) -> SimpleFunction {
        let terms: Vec<(&Rational, &SimpleFunction)> = self
            .weights
            .iter()
            .zip(&self.indices)
            .map(|(w, i)| (w, &fs[*i]))
            .collect();
        SimpleFunction::linear_combination(&terms)
    }
}

/// `G[j][k] = ∫ f_j f_k dm`.
pub fn gram(fs: &[SimpleFunction], m: &MeasureSpec) -> Result<Vec<Vec<Rational>>> {
    let n = fs.len();
    let mut g = vec![vec![Rational::zero(); n]; n];
    for j in 0..n {
        for k in j..n {
            let v = l2_inner(&fs[j], &fs[k], m)?;
            g[k][j] = v.clone();
            g[j][k] = v;
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinNorm {
    pub weights: ConvexWeights,
    /// `wᵀGw` for the snapped rational weights.
    pub norm_sq: f64,
    /// `wᵀGw − min_j (Gw)_j` at the final floating-point iterate.
    pub gap: f64,
    pub iterations: usize,
}

/// Minimum of `wᵀGw` over the simplex, for the functions `fs` in `L²(m)`.
pub fn min_norm_hull(fs: &[SimpleFunction], m: &MeasureSpec, tol: f64) -> Result<MinNorm> {
    if fs.is_empty() {
        return Err(Error::EmptyInput("min_norm_hull needs at least one function"));
    }
    let g = gram(fs, m)?;
    min_norm_gram(&g, 0, tol)
}

/// Min-norm weights for the principal submatrix of `g` starting at `offset`;
/// returned indices refer to rows of `g`.
pub fn min_norm_gram(g: &[Vec<Rational>], offset: usize, tol: f64) -> Result<MinNorm> {
    let n = g.len() - offset;
    if n == 0 {
        return Err(Error::EmptyInput("min_norm_gram needs at least one function"));
    }
    let gf = DMatrix::from_fn(n, n, |j, k| rational::to_f64(&g[offset + j][offset + k]));
    let (w, gap, iterations) = away_step_frank_wolfe(&gf, tol)?;
    let snapped = snap_to_simplex(&w);
    let mut norm_sq = Rational::zero();
    for (j, a) in snapped.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (k, b) in snapped.iter().enumerate() {
            if !b.is_zero() {
                norm_sq += a * b * &g[offset + j][offset + k];
            }
        }
    }
    let (indices, weights): (Vec<usize>, Vec<Rational>) = snapped
        .into_iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(i, w)| (i + offset, w))
        .unzip();
    Ok(MinNorm {
        weights: ConvexWeights::new(indices, weights)?,
        norm_sq: rational::to_f64(&norm_sq),
        gap,
        iterations,
    })
}

fn objective(g: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(g * w))
}

fn gap_of(gw: &DVector<f64>, w: &DVector<f64>) -> f64 {
    w.dot(gw) - gw.min()
}

/// Away-step Frank–Wolfe with exact line search; every few steps the
/// minimizer on the affine hull of the active face is tried directly.
fn away_step_frank_wolfe(g: &DMatrix<f64>, tol: f64) -> Result<(DVector<f64>, f64, usize)> {
    let n = g.nrows();
    let mut w = DVector::zeros(n);
    w[0] = 1.0;
    let mut gw = g * &w;
    for it in 0..MAX_ITERATIONS {
        let gap = gap_of(&gw, &w);
        if gap <= tol {
            return Ok((w, gap.max(0.0), it));
        }
        if it % POLISH_EVERY == POLISH_EVERY - 1 {
            if let Some(p) = polish(g, &w) {
                if objective(g, &p) <= objective(g, &w) {
                    w = p;
                    gw = g * &w;
                    continue;
                }
            }
        }
        let wgw = w.dot(&gw);
        let s = gw.argmin().0;
        let a = (0..n)
            .filter(|&j| w[j] > 0.0)
            .max_by(|&x, &y| gw[x].total_cmp(&gw[y]).then(y.cmp(&x)))
            .expect("iterate has support");
        let fw_descent = wgw - gw[s];
        let away_descent = gw[a] - wgw;
        let (d, t_max) = if fw_descent >= away_descent {
            let mut d = -&w;
            d[s] += 1.0;
            (d, 1.0)
        } else {
            let mut d = w.clone();
            d[a] -= 1.0;
            let wa = w[a];
            (d, if wa < 1.0 { wa / (1.0 - wa) } else { f64::INFINITY })
        };
        let gd = g * &d;
        let curvature = d.dot(&gd);
        let slope = d.dot(&gw);
        let t = if curvature > 0.0 {
            (-slope / curvature).clamp(0.0, t_max)
        } else {
            t_max
        };
        if !t.is_finite() || t == 0.0 {
            // no progress possible along either direction
            let gap = gap_of(&gw, &w);
            return Err(Error::IterationBudgetExceeded {
                iterations: it,
                gap,
                tol,
            });
        }
        w += t * &d;
        for x in w.iter_mut() {
            if *x < ACTIVE_WEIGHT {
                *x = 0.0;
            }
        }
        let total = w.sum();
        w /= total;
        gw = g * &w;
    }
    let gap = gap_of(&gw, &w);
    Err(Error::IterationBudgetExceeded {
        iterations: MAX_ITERATIONS,
        gap,
        tol,
    })
}

/// Solves `min wᵀGw` subject to `Σ w = 1` on the support of `w`; returns the
/// result only when it stays inside the simplex.
fn polish(g: &DMatrix<f64>, w: &DVector<f64>) -> Option<DVector<f64>> {
    let active: Vec<usize> = (0..w.len()).filter(|&j| w[j] > 0.0).collect();
    let k = active.len();
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            kkt[(r, c)] = g[(i, j)];
        }
        kkt[(r, k)] = 1.0;
        kkt[(k, r)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().take(k).any(|x| !x.is_finite() || *x < 0.0) {
        return None;
    }
    let mut out = DVector::zeros(w.len());
    for (r, &i) in active.iter().enumerate() {
        out[i] = sol[r];
    }
    Some(out)
}

/// Rounds each weight to a nearby simple fraction and renormalizes exactly.
fn snap_to_simplex(w: &DVector<f64>) -> Vec<Rational> {
    let approx: Vec<Rational> = w
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                return Rational::zero();
            }
            simplest_near(x, SNAP_TOLERANCE).unwrap_or_else(|| Rational::from_float(x).expect("finite weight"))
        })
        .collect();
    let total: Rational = approx.iter().sum();
    approx.into_iter().map(|a| a / &total).collect()
}

/// First continued-fraction convergent of `x` within `eps`.
fn simplest_near(x: f64, eps: f64) -> Option<Rational> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 > SNAP_MAX_DENOMINATOR {
            return None;
        }
        if (p2 as f64 / q2 as f64 - x).abs() <= eps {
            return Some(Rational::new(p2.into(), q2.into()));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// `g_n`: near-min-norm element of `co(f_k : k ≥ n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FccTerm {
    pub g: SimpleFunction,
    pub weights: ConvexWeights,
    pub norm_sq: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FccSequence {
    pub terms: Vec<FccTerm>,
    /// `‖g_n − g_k‖₂` for all pairs.
    pub distances: Vec<Vec<f64>>,
}

impl FccSequence {
    pub fn limit(&self) -> &SimpleFunction {
        &self.terms.last().expect("nonempty sequence").g
    }
}

pub fn fcc_sequence(fs: &[SimpleFunction], m: &MeasureSpec, tol: f64) -> Result<FccSequence> {
    if fs.is_empty() {
        return Err(Error::EmptyInput("fcc_sequence needs at least one function"));
    }
    let g = gram(fs, m)?;
    let mut terms = Vec::with_capacity(fs.len());
    for n in 0..fs.len() {
        let mn = min_norm_gram(&g, n, tol)?;
        terms.push(FccTerm {
            g: mn.weights.combine(fs),
            weights: mn.weights,
            norm_sq: mn.norm_sq,
            gap: mn.gap,
        });
    }
    let distances = terms
        .iter()
        .map(|a| {
            terms
                .iter()
                .map(|b| {
                    rational::to_f64(&distance_sq(&a.weights, &b.weights, &g))
                        .max(0.0)
                        .sqrt()
                })
                .collect()
        })
        .collect();
    Ok(FccSequence { terms, distances })
}

/// `‖Σ a_i f_i − Σ b_i f_i‖²` from the Gram matrix.
pub fn distance_sq(a: &ConvexWeights, b: &ConvexWeights, g: &[Vec<Rational>]) -> Rational {
    let mut idx: Vec<usize> = a.indices.iter().chain(&b.indices).copied().collect();
    idx.sort_unstable();
    idx.dedup();
    let diff: Vec<(usize, Rational)> = idx
        .into_iter()
        .map(|i| (i, a.weight_of(i) - b.weight_of(i)))
        .filter(|(_, d)| !d.is_zero())
        .collect();
    let mut total = Rational::zero();
    for (i, x) in &diff {
        for (j, y) in &diff {
            total += x * y * &g[*i][*j];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn rademacher(k: u32, level: u32) -> SimpleFunction {
        let values = (0..1u64 << level)
            .map(|j| if (j >> (level - k)) & 1 == 0 { int(1) } else { int(-1) })
            .collect();
        SimpleFunction::new(Partition::dyadic(level), values).unwrap()
    }

    fn leb() -> MeasureSpec {
        MeasureSpec::lebesgue()
    }

    #[test]
    fn gram_examples() {
        let one = SimpleFunction::constant(int(1));
        assert_eq!(gram(&[one], &leb()).unwrap(), vec![vec![int(1)]]);
        let g = gram(&[rademacher(1, 2), rademacher(2, 2)], &leb()).unwrap();
        assert_eq!(g, vec![vec![int(1), int(0)], vec![int(0), int(1)]]);
        let f = SimpleFunction::new(Partition::dyadic(1), vec![ratio(3, 2), ratio(1, 2)]).unwrap();
        let g = gram(&[f.clone(), f], &leb()).unwrap();
        assert!(g.iter().flatten().all(|x| *x == ratio(5, 4)));
    }

    #[test]
    fn single_function() {
        let f = SimpleFunction::new(Partition::dyadic(1), vec![int(2), int(0)]).unwrap();
        let r = min_norm_hull(&[f], &leb(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.weights, ConvexWeights::single(0));
        assert_eq!(r.norm_sq, 2.0);
    }

    #[test]
    fn symmetric_pair_meets_at_midpoint() {
        let r1 = rademacher(1, 1);
        let neg = r1.map(|v| -v);
        let r = min_norm_hull(&[r1, neg], &leb(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.weights.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(r.norm_sq, 0.0);
    }

    #[test]
    fn orthonormal_family_gets_uniform_weights() {
        for n in 1..=6u32 {
            let fs: Vec<_> = (1..=n).map(|k| rademacher(k, n)).collect();
            let r = min_norm_hull(&fs, &leb(), DEFAULT_TOLERANCE).unwrap();
            assert!(
                r.weights.weights().iter().all(|w| *w == ratio(1, n as i64)),
                "{n}: {:?} after {} iterations",
                r.weights,
                r.iterations
            );
            assert!((r.norm_sq - 1.0 / n as f64).abs() < 1e-12);
            assert!(r.gap <= DEFAULT_TOLERANCE);
        }
    }

    /// Brute-force grid over the simplex for up to three functions.
    fn grid_minimum(g: &[Vec<Rational>], steps: i64) -> f64 {
        let n = g.len();
        let gf: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(rational::to_f64).collect()).collect();
        let eval = |w: &[f64]| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += w[i] * w[j] * gf[i][j];
                }
            }
            s
        };
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let c = steps - a - b;
                let w = [a as f64, b as f64, c as f64].map(|x| x / steps as f64);
                if n < 3 && c != 0 || n < 2 && b != 0 {
                    continue;
                }
                best = best.min(eval(&w[..n]));
            }
        }
        best
    }

    #[test]
    fn matches_grid_search_for_small_families() {
        let fs = [
            SimpleFunction::new(Partition::dyadic(2), vec![int(1), int(2), int(0), int(1)]).unwrap(),
            SimpleFunction::new(Partition::dyadic(1), vec![int(0), int(3)]).unwrap(),
            rademacher(2, 2),
        ];
        for n in 1..=3 {
            let r = min_norm_hull(&fs[..n], &leb(), DEFAULT_TOLERANCE).unwrap();
            let g = gram(&fs[..n], &leb()).unwrap();
            let grid = grid_minimum(&g, 300);
            assert!(r.norm_sq <= grid + 1e-9, "n={n}: {} vs grid {grid}", r.norm_sq);
            assert!(grid - r.norm_sq < 1e-3);
        }
    }

    #[test]
    fn all_zero_family() {
        let z = SimpleFunction::zero();
        let r = min_norm_hull(&[z.clone(), z.clone(), z], &leb(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(r.weights, ConvexWeights::single(0));
        assert_eq!(r.norm_sq, 0.0);
    }

    #[test]
    fn constant_sequence_is_fixed() {
        let f = SimpleFunction::new(Partition::dyadic(1), vec![int(2), int(1)]).unwrap();
        let seq = fcc_sequence(&[f.clone(), f.clone(), f.clone()], &leb(), DEFAULT_TOLERANCE).unwrap();
        for (n, t) in seq.terms.iter().enumerate() {
            assert!(t.weights.min_index() >= n);
            assert!(crate::simple_function::equal_ae(&t.g, &f, &leb()).unwrap());
        }
    }

    #[test]
    fn rademacher_tail_norms() {
        let fs: Vec<_> = (1..=6).map(|k| rademacher(k, 6)).collect();
        let seq = fcc_sequence(&fs, &leb(), DEFAULT_TOLERANCE).unwrap();
        for (n, t) in seq.terms.iter().enumerate() {
            assert!((t.norm_sq - 1.0 / (6 - n) as f64).abs() < 1e-12);
        }
        let d01 = seq.distances[0][1];
        // ‖g_0 − g_1‖² = 1/5 − 1/6 for uniform weights on orthonormal vectors
        assert!((d01 * d01 - (1.0 / 5.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn weights_validation() {
        assert!(ConvexWeights::new(vec![0, 1], vec![ratio(1, 2), ratio(1, 3)]).is_err());
        assert!(ConvexWeights::new(vec![1, 0], vec![ratio(1, 2), ratio(1, 2)]).is_err());
        assert!(ConvexWeights::new(vec![0, 1], vec![ratio(3, 2), ratio(-1, 2)]).is_err());
        assert!(ConvexWeights::new(vec![0, 2], vec![ratio(1, 2), ratio(1, 2)]).is_ok());
    }

    fn arb_weights(len: usize, start: usize) -> impl Strategy<Value = ConvexWeights> {
        prop::collection::vec(0u32..5, len).prop_filter_map("nonzero", move |raw| {
            let total: u32 = raw.iter().sum();
            if total == 0 {
                return None;
            }
            let pairs: Vec<(usize, Rational)> = raw
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0)
                .map(|(i, w)| (start + i, ratio(*w as i64, total as i64)))
                .collect();
            let (idx, ws) = pairs.into_iter().unzip();
            ConvexWeights::new(idx, ws).ok()
        })
    }

    proptest! {
        // an fcc of an fcc is an fcc of the original sequence
        #[test]
        fn fcc_of_fcc_stays_forward(
            inner in prop::collection::vec((0usize..6).prop_flat_map(|n| arb_weights(4, n)), 6),
            outer_start in 0usize..6,
            outer_raw in prop::collection::vec(0u32..4, 6),
        ) {
            // make inner[n] forward: indices ≥ n
            let inner: Vec<ConvexWeights> = inner
                .into_iter()
                .enumerate()
                .map(|(n, w)| {
                    let shift = n.saturating_sub(w.min_index());
                    ConvexWeights::new(w.indices().iter().map(|i| i + shift).collect(), w.weights().to_vec()).unwrap()
                })
                .collect();
            let picks: Vec<(usize, u32)> = outer_raw
                .iter()
                .enumerate()
                .filter(|(j, w)| *j >= outer_start && **w > 0)
                .map(|(j, w)| (j, *w))
                .collect();
            prop_assume!(!picks.is_empty());
            let total: u32 = picks.iter().map(|p| p.1).sum();
            let (idx, ws): (Vec<usize>, Vec<Rational>) =
                picks.iter().map(|(j, w)| (*j, ratio(*w as i64, total as i64))).unzip();
            let outer = ConvexWeights::new(idx, ws).unwrap();
            let composed = outer.compose(&inner);
            prop_assert!(composed.min_index() >= outer_start);
            let sum: Rational = composed.weights().iter().sum();
            prop_assert!(sum.is_one());
            prop_assert!(ConvexWeights::new(composed.indices().to_vec(), composed.weights().to_vec()).is_ok());
        }
    }
}
