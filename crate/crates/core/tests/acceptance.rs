//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `cargo test -p radon-core --test acceptance`
//! `cargo test -p radon-core --test acceptance -- --include-unattainable`

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use radon_core::decomposition::{decompose_on_partition, decompose_with_engine, derivative, DecomposeConfig};
use radon_core::engine::{self, EngineConfig, EngineOutput, SplitMode};
use radon_core::fcc::{fcc_sequence, gram, min_norm_gram, min_norm_hull, DEFAULT_TOLERANCE};
use radon_core::rational::{int, ratio, to_f64};
use radon_core::sampling::{self, Grid};
use radon_core::simple_function::{
    cell_masses, conditional_expectation, equal_ae, exp_functional, f_pi, integrate, integrate_over, l1_distance,
    tail_integral, tail_mass,
};
use radon_core::{MeasureSpec, Partition, Rational, SimpleFunction};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(mode: SplitMode, rounds: usize) -> DecomposeConfig {
    DecomposeConfig {
        engine: EngineConfig {
            max_rounds: rounds,
            split_mode: mode,
            checkpoint_stride: 1,
            ..EngineConfig::default()
        },
        ..DecomposeConfig::default()
    }
}

fn leb() -> MeasureSpec {
    MeasureSpec::lebesgue()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn criterion_1_instances() -> Vec<SimpleFunction> {
    let mut rng = sampling::rng(1);
    // values k/4 < 19 keep h = f/(1+f) under the singular cutoff 19/20
    (0..24)
        .map(|i| sampling::dyadic_step(&mut rng, 1 + i % 4, 60, 4))
        .collect()
}

fn mixed() -> MeasureSpec {
    MeasureSpec::sum(vec![
        MeasureSpec::scale(ratio(1, 2), leb()).unwrap(),
        MeasureSpec::scale(ratio(1, 2), MeasureSpec::dirac(ratio(1, 3)).unwrap()).unwrap(),
    ])
}

fn cantor() -> MeasureSpec {
    MeasureSpec::cantor(int(1)).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = Duration::ZERO;
    let mut failures = Vec::new();
    for (i, f) in criterion_1_instances().iter().enumerate() {
        let nu = sampling::step_measure(f);
        let (d, t) = timed(|| derivative(&nu, &leb(), &config(SplitMode::BestOnly, 20)).unwrap());
        worst = worst.max(t);
        // μ is Lebesgue, so every cell is μ-positive and a.e. equality is
        // equality on every cell of the common refinement
        if !equal_ae(&d, f, &leb()).unwrap() || t >= Duration::from_secs(1) {
            failures.push(i);
        }
    }
    outcome(
        failures.is_empty(),
        format!("24 dyadic step densities, levels 1-4; failures {failures:?}; slowest {worst:?}"),
    )
}

/// `Σ γ(A) e^{-h(A)}` over cells of a partition on which `h = dν/dγ` is constant.
fn a_star_on(nu: &MeasureSpec, mu: &MeasureSpec, pi: &Partition) -> f64 {
    let n = cell_masses(nu, pi).unwrap();
    let m = cell_masses(mu, pi).unwrap();
    n.iter()
        .zip(&m)
        .map(|(n, m)| {
            let g = to_f64(&(n + m));
            if g == 0.0 {
                0.0
            } else {
                g * (-to_f64(n) / g).exp()
            }
        })
        .sum()
}

fn criterion_2_instances() -> Vec<(&'static str, MeasureSpec, MeasureSpec, f64)> {
    let step =
        MeasureSpec::piecewise_constant(vec![int(0), ratio(1, 2), int(1)], vec![ratio(3, 2), ratio(1, 2)]).unwrap();
    let atoms = MeasureSpec::atoms(vec![(ratio(1, 4), int(1)), (ratio(5, 7), ratio(1, 3))]).unwrap();
    let single = MeasureSpec::dirac(ratio(1, 3)).unwrap();
    let pc_nu = MeasureSpec::piecewise_constant(
        vec![int(0), ratio(1, 3), ratio(5, 8), int(1)],
        vec![int(2), ratio(1, 5), int(3)],
    )
    .unwrap();
    let pc_mu = MeasureSpec::piecewise_constant(vec![int(0), ratio(1, 2), int(1)], vec![int(1), ratio(7, 2)]).unwrap();
    let cuts = Partition::from_cuts(vec![ratio(1, 3), ratio(1, 2), ratio(5, 8)]).unwrap();
    let mut out = vec![
        (
            "step (3/2, 1/2) vs Lebesgue",
            step,
            leb(),
            1.25 * (-0.6f64).exp() + 0.75 * (-1.0f64 / 3.0).exp(),
        ),
        ("nu = mu = Lebesgue", leb(), leb(), 2.0 * (-0.5f64).exp()),
        // atoms separate completely: a* = mu(Ω) + nu(Ω)/e
        (
            "atoms 1/4, 5/7 vs Lebesgue",
            atoms,
            leb(),
            1.0 + (4.0 / 3.0) * (-1.0f64).exp(),
        ),
        ("dirac 1/3 vs Lebesgue", single, leb(), 1.0 + (-1.0f64).exp()),
    ];
    let a = a_star_on(&pc_nu, &pc_mu, &cuts);
    out.push(("piecewise constant nu vs piecewise constant mu", pc_nu, pc_mu, a));
    out
}

fn criterion_2() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, nu, mu, a_star) in criterion_2_instances() {
        let out = engine::run(&nu, &mu, &config(SplitMode::AllImproving, 30).engine).unwrap();
        let a = out.final_a();
        let ok = a >= a_star - 1e-9 && a <= a_star + 1e-12;
        pass &= ok;
        lines.push(format!("{name}: a_N - a* = {:.3e}", a - a_star));
    }
    let closed = 1.25 * (-0.6f64).exp() + 0.75 * (-1.0f64 / 3.0).exp();
    pass &= (closed - 1.223413).abs() < 1e-6;
    outcome(pass, lines.join("; "))
}

fn criterion_3() -> Outcome {
    let ((d, out), t) =
        timed(|| decompose_with_engine(&mixed(), &leb(), &config(SplitMode::AllImproving, 25)).unwrap());
    let half = SimpleFunction::constant(ratio(1, 2));
    let l1 = to_f64(&l1_distance(&d.density, &half, &leb()).unwrap());
    let s = to_f64(&d.singular_mass);
    let pass = l1 <= 1e-6 && (s - 0.5).abs() <= 1e-6 && t < Duration::from_secs(5) && d.residual <= ratio(1, 1_000_000);
    outcome(
        pass,
        format!(
            "L1 error {l1:.3e}, singular mass {s:.15}, residual {}, {} cells, singular cells {}, {t:?}",
            d.residual,
            out.final_partition.len(),
            d.singular_cells
        ),
    )
}

fn criterion_4() -> Outcome {
    let ((d, out), t) =
        timed(|| decompose_with_engine(&cantor(), &leb(), &config(SplitMode::AllImproving, 30)).unwrap());
    let ac = to_f64(&integrate(&d.density, &leb()).unwrap());
    let s = to_f64(&d.singular_mass);
    // triadic oracle: at level 8 every Cantor-support cell has h ≥ 19/20 and
    // their μ-mass is (2/3)^8
    let level = 8;
    let triadic = Partition::from_cuts((1..3i64.pow(level)).map(|j| ratio(j, 3i64.pow(level))).collect()).unwrap();
    let on_grid = decompose_on_partition(
        &cantor(),
        &leb(),
        &triadic,
        DecomposeConfig::default().singular_threshold.as_ref(),
    )
    .unwrap();
    let oracle_ok = leb().mass(&on_grid.singular_cells).unwrap().value == ratio(2i64.pow(level), 3i64.pow(level))
        && on_grid.singular_mass.is_one();
    let pass = ac <= 1e-3 && s >= 1.0 - 1e-3 && t < Duration::from_secs(10) && oracle_ok;
    outcome(
        pass,
        format!(
            "∫density dμ = {ac:.3e}, singular mass {s}, {} cells, terminated by {}, {t:?}; triadic level-8 oracle {}",
            out.final_partition.len(),
            out.terminated_by.as_str(),
            if oracle_ok { "matches" } else { "MISMATCH" }
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = sampling::rng(5);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..1000 {
        let cantor = i % 4 == 0;
        let nu = sampling::random_measure(&mut rng, cantor);
        let mu = sampling::random_measure(&mut rng, cantor);
        let grid = Grid::for_measures(&[&nu, &mu]);
        let coarse = sampling::random_partition(&mut rng, grid, 6);
        let fine = sampling::random_refinement(&mut rng, &coarse, grid, 6);
        let gamma = MeasureSpec::sum(vec![mu, nu.clone()]);
        let a = exp_functional(&nu, &gamma, &coarse).unwrap();
        let b = exp_functional(&nu, &gamma, &fine).unwrap();
        worst = worst.min(b - a);
        if b < a - 1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("1000 instances, {violations} violations, smallest increment {worst:.3e}"),
    )
}

/// `E[φ | σ(π)]` under `m`, from cell and piece masses.
fn oracle_conditional(phi: &SimpleFunction, pi: &Partition, m: &MeasureSpec) -> Vec<Option<Rational>> {
    pi.cells()
        .iter()
        .map(|a| {
            let mass = m.mass(a).unwrap().value;
            if mass.is_zero() {
                return None;
            }
            let weighted: Rational = phi
                .cells()
                .map(|(b, v)| v * m.mass(&a.intersection(b)).unwrap().value)
                .sum();
            Some(weighted / mass)
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let mut rng = sampling::rng(6);
    let (mut tower, mut integral, mut averaging, mut oracle) = (0, 0, 0, 0);
    for i in 0..1000 {
        let cantor = i % 4 == 0;
        let nu = sampling::random_measure(&mut rng, cantor);
        let mu = sampling::random_measure(&mut rng, cantor);
        let grid = Grid::for_measures(&[&nu, &mu]);
        let coarse = sampling::random_partition(&mut rng, grid, 6);
        let fine = sampling::random_refinement(&mut rng, &coarse, grid, 6);
        let finer = sampling::random_refinement(&mut rng, &fine, grid, 3);
        let phi = sampling::random_simple_function(&mut rng, &finer);

        let e_coarse = conditional_expectation(&phi, &coarse, &mu).unwrap();
        let e_fine = conditional_expectation(&phi, &fine, &mu).unwrap();
        let chained = conditional_expectation(&e_fine, &coarse, &mu).unwrap();
        if !equal_ae(&chained, &e_coarse, &mu).unwrap() {
            tower += 1;
        }
        if integrate(&e_coarse, &mu).unwrap() != integrate(&phi, &mu).unwrap() {
            integral += 1;
        }
        for (want, got) in oracle_conditional(&phi, &coarse, &mu).iter().zip(e_coarse.values()) {
            if let Some(w) = want {
                if w != got {
                    oracle += 1;
                }
            }
        }
        // ν(A) = ∫_A f_π dμ on every μ-positive cell
        let f = f_pi(&nu, &mu, &fine).unwrap();
        for cell in fine.cells() {
            if mu.mass(cell).unwrap().value.is_zero() {
                continue;
            }
            if integrate_over(&f, cell, &mu).unwrap() != nu.mass(cell).unwrap().value {
                averaging += 1;
            }
        }
    }
    let pass = tower + integral + averaging + oracle == 0;
    outcome(
        pass,
        format!(
            "1000 instances; tower {tower}, integral {integral}, averaging {averaging}, cell-average oracle {oracle} failures"
        ),
    )
}

/// `r_k = ±1` alternating on the dyadic cells of level `k`.
fn rademacher(k: u32) -> SimpleFunction {
    let values = (0..1u64 << k)
        .map(|j| if j % 2 == 0 { int(1) } else { int(-1) })
        .collect();
    SimpleFunction::new(Partition::dyadic(k), values).unwrap()
}

fn fcc_limit_distance(out: &EngineOutput, nu: &MeasureSpec, mu: &MeasureSpec) -> f64 {
    let gamma = MeasureSpec::sum(vec![mu.clone(), nu.clone()]);
    let fs: Vec<SimpleFunction> = out.trace.checkpoints.iter().map(|c| c.f_gamma.clone()).collect();
    let seq = fcc_sequence(&fs, &gamma, DEFAULT_TOLERANCE).unwrap();
    to_f64(&l1_distance(seq.limit(), &out.f_gamma, &gamma).unwrap())
}

fn criterion_7() -> Outcome {
    const N: u32 = 12;
    let fs: Vec<SimpleFunction> = (1..=N).map(rademacher).collect();
    let mut worst_norm = 0.0f64;
    let mut worst_gap = 0.0f64;
    let full = min_norm_hull(&fs, &leb(), DEFAULT_TOLERANCE).unwrap();
    worst_norm = worst_norm.max((full.norm_sq - 1.0 / N as f64).abs());
    // every tail from one Gram matrix
    let g = gram(&fs, &leb()).unwrap();
    for n in 1..=N as usize {
        let r = min_norm_gram(&g, n - 1, DEFAULT_TOLERANCE).unwrap();
        worst_norm = worst_norm.max((r.norm_sq - 1.0 / (N as usize - n + 1) as f64).abs());
        worst_gap = worst_gap.max(r.gap);
    }
    let mut worst_limit = 0.0f64;
    for f in criterion_1_instances().iter().take(8) {
        let nu = sampling::step_measure(f);
        let out = engine::run(&nu, &leb(), &config(SplitMode::BestOnly, 20).engine).unwrap();
        worst_limit = worst_limit.max(fcc_limit_distance(&out, &nu, &leb()));
    }
    let out = engine::run(&mixed(), &leb(), &config(SplitMode::AllImproving, 25).engine).unwrap();
    worst_limit = worst_limit.max(fcc_limit_distance(&out, &mixed(), &leb()));
    let pass = worst_norm <= 1e-8 && worst_gap <= 1e-10 && worst_limit <= 1e-6;
    outcome(
        pass,
        format!("max |norm² - 1/(N-n+1)| = {worst_norm:.3e}, max gap {worst_gap:.3e}, max L1(γ) fcc-limit distance {worst_limit:.3e}"),
    )
}

fn criterion_8() -> Outcome {
    // (ν, μ, esssup of dν/dμ)
    let mut instances: Vec<(MeasureSpec, MeasureSpec, Rational)> = criterion_1_instances()
        .iter()
        .take(8)
        .map(|f| {
            (
                sampling::step_measure(f),
                leb(),
                f.values().iter().max().unwrap().clone(),
            )
        })
        .collect();
    // density 1 + 2x against Lebesgue: esssup 3
    instances.push((
        MeasureSpec::density(vec![int(0), int(1)], vec![vec![int(1), int(2)]]).unwrap(),
        leb(),
        int(3),
    ));
    // ν = 3x² dx against μ = 2x dx: dν/dμ = 3x/2, esssup 3/2
    instances.push((
        MeasureSpec::density(vec![int(0), int(1)], vec![vec![int(0), int(0), int(3)]]).unwrap(),
        MeasureSpec::density(vec![int(0), int(1)], vec![vec![int(0), int(2)]]).unwrap(),
        ratio(3, 2),
    ));
    let (mut identity, mut far_tail, mut above, mut partitions) = (0, 0, 0, 0);
    for (nu, mu, esssup) in &instances {
        let out = engine::run(nu, mu, &config(SplitMode::AllImproving, 8).engine).unwrap();
        for c in &out.trace.checkpoints {
            partitions += 1;
            let f = f_pi(nu, mu, c.partition()).unwrap();
            let mut distinct: Vec<Rational> = f.values().to_vec();
            distinct.sort();
            distinct.dedup();
            let step = distinct.len().div_ceil(32);
            let mut ks: Vec<Rational> = distinct.into_iter().step_by(step).collect();
            ks.push(esssup / int(2));
            ks.push(esssup + ratio(1, 10));
            for k in &ks {
                let lhs = tail_integral(&f, k, mu).unwrap();
                let rhs = tail_mass(&f, k, nu).unwrap();
                if lhs != rhs {
                    identity += 1;
                }
                if k > esssup && !rhs.is_zero() {
                    above += 1;
                }
            }
            if !tail_integral(&f, &(esssup * int(10)), mu).unwrap().is_zero() {
                far_tail += 1;
            }
        }
    }
    outcome(
        identity + far_tail + above == 0,
        format!(
            "{} instances, {partitions} partitions; identity {identity}, tail above esssup {above}, tail at 10·esssup {far_tail} failures",
            instances.len()
        ),
    )
}

fn agreement(name: &str, nu: &MeasureSpec, mu: &MeasureSpec, rounds: usize, lines: &mut Vec<String>) -> bool {
    let best = engine::run(nu, mu, &config(SplitMode::BestOnly, rounds).engine)
        .unwrap()
        .final_a();
    let all = engine::run(nu, mu, &config(SplitMode::AllImproving, rounds).engine)
        .unwrap()
        .final_a();
    let ok = (best - all).abs() <= 1e-9;
    if !ok {
        lines.push(format!("{name}: best {best:.12} vs all {all:.12}"));
    }
    ok
}

fn criterion_9a() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let mut count = 0;
    for (i, f) in criterion_1_instances().iter().enumerate() {
        pass &= agreement(
            &format!("criterion 1 #{i}"),
            &sampling::step_measure(f),
            &leb(),
            20,
            &mut lines,
        );
        count += 1;
    }
    for (name, nu, mu, _) in criterion_2_instances() {
        pass &= agreement(name, &nu, &mu, 30, &mut lines);
        count += 1;
    }
    pass &= agreement("mixed", &mixed(), &leb(), 25, &mut lines);
    count += 1;
    let detail = if lines.is_empty() {
        format!("{count} instances from criteria 1-3 agree within 1e-9")
    } else {
        format!("{count} instances; disagreements: {}", lines.join("; "))
    };
    outcome(pass, detail)
}

fn criterion_9b() -> Outcome {
    let mut lines = Vec::new();
    let pass = agreement("Cantor vs Lebesgue", &cantor(), &leb(), 30, &mut lines);
    outcome(pass, lines.join("; "))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include_unattainable = args.iter().any(|a| a == "--include-unattainable");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();

    type Criterion = (&'static str, &'static str, fn() -> Outcome, bool);
    let criteria: [Criterion; 10] = [
        ("1", "exact finite recovery", criterion_1, false),
        ("2", "supremum attainment", criterion_2, false),
        ("3", "mixed decomposition", criterion_3, false),
        ("4", "mutually singular detection", criterion_4, false),
        ("5", "Jensen monotonicity", criterion_5, false),
        ("6", "conditional-expectation laws", criterion_6, false),
        ("7", "fcc / min-norm", criterion_7, false),
        ("8", "uniform-integrability probe", criterion_8, false),
        ("9a", "strategy agreement, criteria 1-3 instances", criterion_9a, false),
        ("9b", "strategy agreement, Cantor instance", criterion_9b, true),
    ];
    let mut failed = 0;
    for (id, name, run, unattainable) in criteria {
        if !filters.is_empty()
            && !filters
                .iter()
                .any(|f| id.starts_with(f.as_str()) || name.contains(f.as_str()))
        {
            continue;
        }
        if unattainable && !include_unattainable {
            println!("SKIP criterion {id} ({name}): needs --include-unattainable; expected to fail at desk scale");
            continue;
        }
        let (o, t) = timed(run);
        println!(
            "{} criterion {id} ({name}) [{:.2}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
