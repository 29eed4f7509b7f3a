use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use radon_core::decomposition::{decompose_on_partition, decompose_with_engine, DecomposeConfig};
use radon_core::engine::{verify_trace, EngineConfig, RefinementTrace};
use radon_core::rational::{self, Rational};
use radon_core::simple_function::{f_pi, l1_distance, tail_integral, tail_mass};
use radon_core::{io, sampling, Error, MeasureSpec, SimpleFunction};

use crate::{DiagnoseArgs, RunArgs, SelfcheckArgs};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Engine(String),
    Monotonicity(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Engine(_) => 3,
            Self::Monotonicity(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) | Self::Engine(m) | Self::Monotonicity(m) => f.write_str(m),
        }
    }
}

fn classify(context: &str, e: Error) -> CliError {
    let msg = format!("{context}: {e}");
    match e {
        Error::Parse { .. }
        | Error::InvalidMeasure { .. }
        | Error::InvalidConfig(_)
        | Error::InvalidSet(_)
        | Error::InvalidPartition(_)
        | Error::DomainError(_)
        | Error::EmptyInput(_) => CliError::Validation(msg),
        Error::MonotonicityViolation { .. } => CliError::Monotonicity(msg),
        _ => CliError::Engine(msg),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Engine(format!("{}: {e}", path.display())))
}

fn load_measure(path: &Path) -> CliResult<MeasureSpec> {
    io::parse_measure(&read(path)?).map_err(|e| classify(&path.display().to_string(), e))
}

fn parse_json(path: &Path) -> CliResult<Value> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Validation(format!("{}: $: {e}", path.display())))
}

fn config_from(args: &RunArgs) -> CliResult<DecomposeConfig> {
    let defaults = EngineConfig::default();
    let engine = EngineConfig {
        max_rounds: args.max_rounds.unwrap_or(defaults.max_rounds),
        gain_tolerance: args.gain_tol.unwrap_or(defaults.gain_tolerance),
        split_mode: args.split_mode.map(Into::into).unwrap_or(defaults.split_mode),
        max_cells: args.max_cells.unwrap_or(defaults.max_cells),
        checkpoint_stride: args.checkpoint_stride.unwrap_or(defaults.checkpoint_stride),
        ..defaults
    };
    let mut config = DecomposeConfig {
        engine,
        ..DecomposeConfig::default()
    };
    match args.singular_threshold.as_deref() {
        None => {}
        Some("off") => config.singular_threshold = None,
        Some(s) => {
            let t = rational::parse(s).map_err(|e| CliError::Validation(format!("--singular-threshold: {e}")))?;
            config.singular_threshold = Some(t);
        }
    }
    config.validate().map_err(|e| classify("configuration", e))?;
    Ok(config)
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    nu: PathBuf,
    mu: PathBuf,
    out: PathBuf,
    max_rounds: usize,
    gain_tolerance: f64,
    split_mode: String,
    singular_threshold: Option<String>,
    checkpoint_stride: usize,
    max_cells: usize,
    terminated_by: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Differentiate,
    Decompose,
}

pub fn run(args: &RunArgs, kind: Kind) -> CliResult<()> {
    let config = config_from(args)?;
    let nu = load_measure(&args.nu)?;
    let mu = load_measure(&args.mu)?;
    let oracle = match &args.oracle_density {
        Some(p) => Some(
            io::simple_function_from_value(&parse_json(p)?, "$").map_err(|e| classify(&p.display().to_string(), e))?,
        ),
        None => None,
    };
    let (d, out) = decompose_with_engine(&nu, &mu, &config).map_err(|e| classify("engine", e))?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::Engine(format!("{}: {e}", args.out.display())))?;

    write(&args.out.join("trace.csv"), &out.trace.to_csv(!args.no_timing))?;
    write(
        &args.out.join("trace.json"),
        &io::trace_to_value(&out.trace).to_string(),
    )?;
    let (name, report) = match kind {
        Kind::Differentiate => ("density.json", io::simple_function_to_value(&d.density)),
        Kind::Decompose => ("decomposition.json", io::decomposition_to_value(&d, Some("trace.json"))),
    };
    write(
        &args.out.join(name),
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )?;

    if args.emit_plot_data {
        let mut plot = String::from("round,a_n,l1_error_vs_oracle\n");
        for r in &out.trace.rounds {
            let err = match (&oracle, out.trace.checkpoints.iter().find(|c| c.round == r.round)) {
                (Some(o), Some(c)) => {
                    let at = decompose_on_partition(&nu, &mu, c.partition(), config.singular_threshold.as_ref())
                        .map_err(|e| classify("plot data", e))?;
                    let dist = l1_distance(&at.density, o, &mu).map_err(|e| classify("plot data", e))?;
                    format!("{:?}", rational::to_f64(&dist))
                }
                _ => String::new(),
            };
            plot.push_str(&format!("{},{:?},{}\n", r.round, r.a_n, err));
        }
        write(&args.out.join("plot.csv"), &plot)?;
    }

    let manifest = RunManifest {
        command: match kind {
            Kind::Differentiate => "differentiate",
            Kind::Decompose => "decompose",
        },
        nu: args.nu.clone(),
        mu: args.mu.clone(),
        out: args.out.clone(),
        max_rounds: config.engine.max_rounds,
        gain_tolerance: config.engine.gain_tolerance,
        split_mode: format!("{:?}", config.engine.split_mode),
        singular_threshold: config.singular_threshold.as_ref().map(rational::format),
        checkpoint_stride: config.engine.checkpoint_stride,
        max_cells: config.engine.max_cells,
        terminated_by: out.terminated_by.as_str(),
    };
    write(
        &args.out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;

    println!(
        "{} cells after {} rounds ({}), a_N = {:.12}",
        out.final_partition.len(),
        out.trace.rounds.last().map(|r| r.round).unwrap_or(0),
        out.terminated_by.as_str(),
        out.final_a()
    );
    if kind == Kind::Decompose {
        println!(
            "singular mass {} ({:.9}), residual {}",
            rational::format(&d.singular_mass),
            rational::to_f64(&d.singular_mass),
            rational::format(&d.residual)
        );
    }
    println!("wrote {}", args.out.join(name).display());
    Ok(())
}

fn load_trace(path: &Path) -> CliResult<RefinementTrace> {
    let ctx = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => io::trace_from_value(&parse_json(path)?).map_err(|e| classify(&ctx, e)),
        _ => RefinementTrace::from_csv(&read(path)?).map_err(|e| classify(&ctx, e)),
    }
}

pub fn diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let trace = load_trace(&args.trace)?;
    let report = verify_trace(&trace).map_err(|e| classify("trace verification", e))?;
    println!("monotonicity: ok over {} recorded rounds", report.rounds);
    println!("final cells: {}", report.final_cells);
    println!("final a_n: {:?}", report.final_a);
    println!("total gain: {:?}", report.total_gain);
    println!("zero-gain splits: {}", report.zero_gain_splits);
    println!(
        "terminated by: {}",
        report.terminated_by.map(|t| t.as_str()).unwrap_or("unknown")
    );
    if let (Some(nu_path), Some(mu_path)) = (&args.nu, &args.mu) {
        let nu = load_measure(nu_path)?;
        let mu = load_measure(mu_path)?;
        if trace.checkpoints.is_empty() {
            println!("uniform integrability: no checkpoints in trace (use a .json trace)");
        }
        for c in &trace.checkpoints {
            let (max, ok) = ui_probe(&nu, &mu, c.partition()).map_err(|e| classify("uniform integrability", e))?;
            println!(
                "uniform integrability at round {}: max density {}, tail identities {}",
                c.round,
                rational::format(&max),
                if ok { "hold" } else { "FAIL" }
            );
            if !ok {
                return Err(CliError::Engine(format!("tail identity failed at round {}", c.round)));
            }
        }
    }
    Ok(())
}

/// Checks `∫_{f≥k} f dμ = ν(f ≥ k)` at every cell value and that the tail
/// above ten times the maximum is empty.
fn ui_probe(nu: &MeasureSpec, mu: &MeasureSpec, pi: &radon_core::Partition) -> radon_core::Result<(Rational, bool)> {
    let f = f_pi(nu, mu, pi)?;
    let max = f.values().iter().max().cloned().unwrap_or_default();
    let mut ok = true;
    for k in f.values() {
        ok &= tail_integral(&f, k, mu)? == tail_mass(&f, k, nu)?;
    }
    let far = &max * Rational::from_integer(10.into());
    if max > Rational::default() {
        ok &= tail_integral(&f, &far, mu)? == Rational::default();
    }
    Ok((max, ok))
}

pub fn selfcheck(args: &SelfcheckArgs) -> CliResult<()> {
    use radon_core::simple_function::{conditional_expectation, exp_functional, integrate};
    let mut rng = sampling::rng(args.seed);
    let mut failures = Vec::new();
    for i in 0..args.instances {
        let cantor = i % 3 == 0;
        let nu = sampling::random_measure(&mut rng, cantor);
        let mu = sampling::random_measure(&mut rng, cantor);
        let grid = sampling::Grid::for_measures(&[&nu, &mu]);
        let coarse = sampling::random_partition(&mut rng, grid, 6);
        let fine = sampling::random_refinement(&mut rng, &coarse, grid, 5);
        let gamma = MeasureSpec::sum(vec![mu.clone(), nu.clone()]);
        let ctx = |e| classify(&format!("instance {i}"), e);
        let a = exp_functional(&nu, &gamma, &coarse).map_err(ctx)?;
        let b = exp_functional(&nu, &gamma, &fine).map_err(ctx)?;
        if b < a - 1e-12 {
            failures.push(format!("instance {i}: functional decreased {a:?} -> {b:?}"));
        }
        let phi: SimpleFunction = sampling::random_simple_function(&mut rng, &fine);
        let e_fine = conditional_expectation(&phi, &fine, &mu).map_err(ctx)?;
        let e_coarse = conditional_expectation(&phi, &coarse, &mu).map_err(ctx)?;
        let tower = conditional_expectation(&e_fine, &coarse, &mu).map_err(ctx)?;
        if !radon_core::simple_function::equal_ae(&tower, &e_coarse, &mu).map_err(ctx)? {
            failures.push(format!("instance {i}: tower property"));
        }
        if integrate(&e_coarse, &mu).map_err(ctx)? != integrate(&phi, &mu).map_err(ctx)? {
            failures.push(format!("instance {i}: integral not preserved"));
        }
    }
    println!(
        "selfcheck seed {}: {} instances, {} failures",
        args.seed,
        args.instances,
        failures.len()
    );
    for f in &failures {
        println!("  {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Engine(format!("{} property failures", failures.len())))
    }
}
