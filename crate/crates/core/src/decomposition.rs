//! Lebesgue decomposition `ν = ν^a + ν^s` read off a refined partition.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::engine::{self, EngineConfig, EngineOutput};
use crate::error::{Error, Result};
use crate::interval_set::IntervalSet;
use crate::measures::MeasureSpec;
use crate::partition::Partition;
use crate::rational::{self, ratio, Rational};
use crate::simple_function::{cell_masses, SimpleFunction};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedRational {
    Finite(Rational),
    Infinite,
}

impl ExtendedRational {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Self::Finite(q) => Some(q),
            Self::Infinite => None,
        }
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(q) => f.write_str(&rational::format(q)),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

/// `x / (1 − x)` on `[0, 1)`, `∞` at 1.
pub fn psi(x: &Rational) -> Result<ExtendedRational> {
    if x < &Rational::zero() || x > &Rational::one() {
        return Err(Error::DomainError(x.clone()));
    }
    if x.is_one() {
        return Ok(ExtendedRational::Infinite);
    }
    Ok(ExtendedRational::Finite(x / (Rational::one() - x)))
}

/// Default cutoff on `h = dν/dγ` above which a cell counts as singular.
pub fn default_singular_threshold() -> Rational {
    ratio(19, 20)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeConfig {
    pub engine: EngineConfig,
    /// Cells with `h(A) ≥` this value are treated as carrying singular mass.
    /// `None` flags only cells with `μ(A) = 0`.
    pub singular_threshold: Option<Rational>,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            singular_threshold: Some(default_singular_threshold()),
        }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if let Some(t) = &self.singular_threshold {
            if t <= &Rational::zero() || t > &Rational::one() {
                return Err(Error::InvalidConfig(format!(
                    "singular threshold {} must lie in (0, 1]",
                    rational::format(t)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Approximation of `dν^a/dμ` on the final partition.
    pub density: SimpleFunction,
    pub singular_mass: Rational,
    pub singular_cells: IntervalSet,
    /// `|ν(Ω) − ∫density dμ − singular_mass|`.
    pub residual: Rational,
    /// `ψ(h(A))` per cell.
    pub g: Vec<ExtendedRational>,
}

/// Cell-level decomposition from exact `ν` and `μ` masses.
fn from_masses(
    partition: &Partition,
    nu: &[Rational],
    mu: &[Rational],
    threshold: Option<&Rational>,
) -> Result<Decomposition> {
    let mut values = Vec::with_capacity(nu.len());
    let mut g = Vec::with_capacity(nu.len());
    let mut singular_mass = Rational::zero();
    let mut singular = Vec::new();
    let mut absolutely_continuous = Rational::zero();
    for (i, (n, m)) in nu.iter().zip(mu).enumerate() {
        let gamma = n + m;
        let h = if gamma.is_zero() { Rational::zero() } else { n / &gamma };
        g.push(psi(&h)?);
        let flagged = n > &Rational::zero() && (m.is_zero() || threshold.is_some_and(|t| &h >= t));
        if flagged {
            singular_mass += n;
            singular.push(partition.cells()[i].clone());
            values.push(Rational::zero());
        } else {
            let v = if m.is_zero() { Rational::zero() } else { n / m };
            absolutely_continuous += &v * m;
            values.push(v);
        }
    }
    let total: Rational = nu.iter().sum();
    let residual = (total - absolutely_continuous - &singular_mass).abs();
    let singular_cells = IntervalSet::from_pieces(singular.iter().flat_map(|s| s.pieces().to_vec()).collect())?;
    Ok(Decomposition {
        density: SimpleFunction::new(partition.clone(), values)?,
        singular_mass,
        singular_cells,
        residual,
        g,
    })
}

pub fn decompose_with_engine(
    nu: &MeasureSpec,
    mu: &MeasureSpec,
    config: &DecomposeConfig,
) -> Result<(Decomposition, EngineOutput)> {
    config.validate()?;
    let out = engine::run(nu, mu, &config.engine)?;
    let d = from_masses(
        &out.final_partition,
        &out.nu_masses,
        &out.mu_masses,
        config.singular_threshold.as_ref(),
    )?;
    Ok((d, out))
}

pub fn decompose(nu: &MeasureSpec, mu: &MeasureSpec, config: &DecomposeConfig) -> Result<Decomposition> {
    decompose_with_engine(nu, mu, config).map(|(d, _)| d)
}

/// Decomposition read off a fixed partition instead of an engine run.
pub fn decompose_on_partition(
    nu: &MeasureSpec,
    mu: &MeasureSpec,
    pi: &Partition,
    threshold: Option<&Rational>,
) -> Result<Decomposition> {
    from_masses(pi, &cell_masses(nu, pi)?, &cell_masses(mu, pi)?, threshold)
}

pub fn derivative(nu: &MeasureSpec, mu: &MeasureSpec, config: &DecomposeConfig) -> Result<SimpleFunction> {
    decompose(nu, mu, config).map(|d| d.density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SplitMode;
    use crate::rational::int;
    use crate::simple_function::{f_pi, integrate, l1_distance};
    use proptest::prelude::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(&int(0)).unwrap(), ExtendedRational::Finite(int(0)));
        assert_eq!(psi(&ratio(1, 2)).unwrap(), ExtendedRational::Finite(int(1)));
        assert_eq!(psi(&int(1)).unwrap(), ExtendedRational::Infinite);
        assert!(matches!(psi(&ratio(3, 2)), Err(Error::DomainError(_))));
        assert!(matches!(psi(&ratio(-1, 2)), Err(Error::DomainError(_))));
    }

    proptest! {
        #[test]
        fn psi_inverts_logistic(n in 0i64..1000, d in 1i64..1000) {
            let g = ratio(n, d);
            let x = &g / (Rational::one() + &g);
            prop_assert_eq!(psi(&x).unwrap(), ExtendedRational::Finite(g));
        }

        #[test]
        fn psi_increases(a in 0i64..999, b in 0i64..999) {
            prop_assume!(a < b);
            let (pa, pb) = (psi(&ratio(a, 1000)).unwrap(), psi(&ratio(b, 1000)).unwrap());
            prop_assert!(pa.finite().unwrap() < pb.finite().unwrap());
        }
    }

    fn best_only(rounds: usize) -> DecomposeConfig {
        DecomposeConfig {
            engine: EngineConfig {
                max_rounds: rounds,
                split_mode: SplitMode::BestOnly,
                ..EngineConfig::default()
            },
            ..DecomposeConfig::default()
        }
    }

    #[test]
    fn equal_measures() {
        let leb = MeasureSpec::lebesgue();
        let d = decompose(&leb, &leb, &DecomposeConfig::default()).unwrap();
        assert!(d.density.values().iter().all(|v| v.is_one()));
        assert!(d.singular_mass.is_zero());
        assert!(d.residual.is_zero());
    }

    #[test]
    fn step_density_recovered() {
        let nu =
            MeasureSpec::piecewise_constant(vec![int(0), ratio(1, 2), int(1)], vec![ratio(3, 2), ratio(1, 2)]).unwrap();
        let leb = MeasureSpec::lebesgue();
        let d = derivative(&nu, &leb, &best_only(20)).unwrap();
        assert_eq!(d.value_at(&ratio(1, 4)), Some(&ratio(3, 2)));
        assert_eq!(d.value_at(&ratio(3, 4)), Some(&ratio(1, 2)));
        let exact = f_pi(&nu, &leb, &Partition::dyadic(1)).unwrap();
        assert!(l1_distance(&d, &exact, &leb).unwrap().is_zero());
    }

    #[test]
    fn zero_measure() {
        let d = derivative(
            &MeasureSpec::zero(),
            &MeasureSpec::lebesgue(),
            &DecomposeConfig::default(),
        )
        .unwrap();
        assert!(d.values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn dirac_has_no_density() {
        let nu = MeasureSpec::dirac(ratio(1, 3)).unwrap();
        let leb = MeasureSpec::lebesgue();
        let d = decompose(&nu, &leb, &DecomposeConfig::default()).unwrap();
        assert!(rational::to_f64(&integrate(&d.density, &leb).unwrap()) <= 1e-3);
        assert!(d.singular_cells.contains_point(&ratio(1, 3)));
        assert!(d.residual.is_zero());
    }

    #[test]
    fn zero_mu_cells_are_singular() {
        let nu = MeasureSpec::lebesgue();
        let mu = MeasureSpec::piecewise_constant(vec![int(0), ratio(1, 2), int(1)], vec![int(2), int(0)]).unwrap();
        let d = decompose_on_partition(&nu, &mu, &Partition::dyadic(1), None).unwrap();
        assert_eq!(d.singular_mass, ratio(1, 2));
        assert_eq!(d.density.values(), &[ratio(1, 2), int(0)]);
        assert_eq!(d.g[1], ExtendedRational::Infinite);
        assert!(d.residual.is_zero());
    }

    #[test]
    fn cell_identity_and_restriction() {
        let nu = MeasureSpec::sum(vec![
            MeasureSpec::piecewise_constant(vec![int(0), ratio(1, 3), int(1)], vec![int(2), ratio(1, 4)]).unwrap(),
            MeasureSpec::atoms(vec![(ratio(5, 8), ratio(1, 10))]).unwrap(),
        ]);
        let mu = MeasureSpec::piecewise_constant(vec![int(0), ratio(3, 4), int(1)], vec![int(1), int(3)]).unwrap();
        for level in 0..5 {
            let pi = Partition::dyadic(level);
            let d = decompose_on_partition(&nu, &mu, &pi, None).unwrap();
            let reference = f_pi(&nu, &mu, &pi).unwrap();
            let (nm, mm) = (cell_masses(&nu, &pi).unwrap(), cell_masses(&mu, &pi).unwrap());
            for i in 0..pi.len() {
                if !mm[i].is_zero() {
                    assert_eq!(d.density.values()[i], reference.values()[i]);
                    assert_eq!(d.g[i], ExtendedRational::Finite(&nm[i] / &mm[i]));
                }
            }
            assert!(d.residual.is_zero());
        }
    }

    #[test]
    fn config_validation() {
        let mut c = DecomposeConfig {
            singular_threshold: Some(int(0)),
            ..DecomposeConfig::default()
        };
        assert!(c.validate().is_err());
        c.singular_threshold = Some(ratio(3, 2));
        assert!(c.validate().is_err());
        c.singular_threshold = Some(int(1));
        assert!(c.validate().is_ok());
    }
}
